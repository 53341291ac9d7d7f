#pragma once

#include <stdexcept>
#include <string>

namespace mats {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationFailed : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class SchemaVersionMismatch : public Error { using Error::Error; };
class RoadmapDisconnected : public Error { using Error::Error; };
class DimensionMismatch : public Error { using Error::Error; };
class NonIntegralSolution : public Error { using Error::Error; };
class DivergenceDetected : public Error { using Error::Error; };
class LimitExceeded : public Error { using Error::Error; };

// Numerical breakdown or iteration limit inside the LP engine.
class SolverError : public Error { using Error::Error; };

}  // namespace mats
