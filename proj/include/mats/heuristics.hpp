#pragma once

#include "mats/instance.hpp"
#include "mats/motion.hpp"
#include "mats/schedule.hpp"

namespace mats {

// Earliest Deadline First: tasks by window end (ties by id), each appended
// to the agent that would finish it soonest (ties by agent id). Order
// constraints are ignored, so the result may deadlock when simulated.
CandidateSchedule edf(const Instance& inst, const TravelTimes& tt);

// Constraint-Aware EDF: only tasks whose predecessors are all scheduled are
// eligible; finish estimates include predecessor finish plus wait. The
// global scheduling order is a topological order of the order constraints.
CandidateSchedule constraint_aware_edf(const Instance& inst, const TravelTimes& tt);

}  // namespace mats
