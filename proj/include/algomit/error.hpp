#ifndef ALGOMIT_ERROR_HPP
#define ALGOMIT_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace algomit {

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied argument is outside the operation's domain.
class InvalidArgument : public Error
{
  public:
    using Error::Error;
};

/// The requested problem is larger than the configured resource limit.
class ResourceError : public Error
{
  public:
    using Error::Error;
};

/// An input violates a numerical precondition (e.g. a non-Hermitian matrix).
class ContractViolation : public Error
{
  public:
    using Error::Error;
};

/// A unitary has an eigenphase too close to +-pi for the principal logarithm.
class BranchAmbiguity : public Error
{
  public:
    using Error::Error;
};

/// The weight system has no solution under the requested regime.
class Infeasible : public Error
{
  public:
    using Error::Error;
};

/// Raised by the nonnegative solver when the origin is outside the convex hull.
class HullInfeasible : public Infeasible
{
  public:
    HullInfeasible(const std::string &what, std::vector<double> direction)
        : Infeasible(what), direction_(std::move(direction))
    {}

    /// Separating direction u: every design column x_k satisfies x_k . u <= 0
    /// while b . u > 0.
    const std::vector<double> &direction() const noexcept { return direction_; }

  private:
    std::vector<double> direction_;
};

/// A randomised search ran out of its retry budget.
class Exhausted : public Error
{
  public:
    using Error::Error;
};

/// Input or output file could not be read, parsed or written.
class IoError : public Error
{
  public:
    using Error::Error;
};

} // namespace algomit

#endif // ALGOMIT_ERROR_HPP
