#pragma once

#include <stdexcept>
#include <string>

namespace mooqp {

// Base class for all library failures. Callers that only need coarse handling
// can catch this one type at the boundary.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input-shaped problems: bad files, bad parameters, malformed instances.
struct InputError : Error { using Error::Error; };
struct BadParams : InputError { using InputError::InputError; };
struct DimensionMismatch : InputError { using InputError::InputError; };
struct UnsupportedLayout : InputError { using InputError::InputError; };
struct InconsistentLevel : InputError { using InputError::InputError; };
struct WeightsNotNormalized : InputError { using InputError::InputError; };
struct InfeasibleLocalSet : InputError { using InputError::InputError; };
struct TooLarge : InputError { using InputError::InputError; };
struct Infeasible : InputError { using InputError::InputError; };

// Solver-shaped problems.
struct SolverError : Error { using Error::Error; };
struct SingularSystem : SolverError { using SolverError::SolverError; };
struct NumericalDivergence : SolverError { using SolverError::SolverError; };
struct NoValidPattern : SolverError { using SolverError::SolverError; };

// Selection/moment bookkeeping.
struct MissingMoments : Error { using Error::Error; };

}  // namespace mooqp
