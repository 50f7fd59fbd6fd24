#pragma once

#include <stdexcept>
#include <string>

namespace cmdpx {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dimension mismatch, out-of-range index, or violated data invariant.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// The LP solver hit its iteration cap or lost numerical control.
class SolverError : public Error {
public:
    using Error::Error;
};

/// The known-model CMDP has no feasible policy.
class CmdpInfeasible : public Error {
public:
    using Error::Error;
};

/// The optimistic planning problem is infeasible (confidence set excludes
/// every feasible model).
class OptimisticInfeasible : public Error {
public:
    using Error::Error;
};

/// A transition confidence box has empty intersection with the simplex.
class ConfidenceSetEmpty : public Error {
public:
    using Error::Error;
};

/// No strictly feasible policy exists.
class NoSlaterPoint : public Error {
public:
    using Error::Error;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace cmdpx
