#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace skewinfo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument values: non-finite points, dimension mismatches, empty grids.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Raised when a function is called outside its contract (e.g. δ ≠ 0 for the
/// symmetry-point score).
class ContractError : public Error {
 public:
  using Error::Error;
};

class StandardizationInfeasible : public Error {
 public:
  StandardizationInfeasible(std::string rule, const std::string& what)
      : Error("standardization infeasible under rule '" + rule + "': " + what),
        rule_(std::move(rule)) {}
  const std::string& rule() const { return rule_; }

 private:
  std::string rule_;
};

/// Node budget exhausted before the error target was met. Carries the best
/// estimate obtained so far.
class QuadratureBudgetError : public Error {
 public:
  QuadratureBudgetError(const std::string& what, std::vector<double> best,
                        std::vector<double> err)
      : Error(what), best_(std::move(best)), err_(std::move(err)) {}
  const std::vector<double>& best_estimate() const { return best_; }
  const std::vector<double>& error_estimate() const { return err_; }

 private:
  std::vector<double> best_;
  std::vector<double> err_;
};

/// A regularity assumption required by a computation failed numerically,
/// typically because a required integral diverges.
class AssumptionViolation : public Error {
 public:
  AssumptionViolation(std::string assumption, const std::string& detail)
      : Error(assumption + " violated: " + detail),
        assumption_(std::move(assumption)) {}
  const std::string& assumption() const { return assumption_; }

 private:
  std::string assumption_;
};

/// The requested operation is not available for this family (no sampler,
/// no degenerate kernel, ...).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// More than one root of a constraint equation was bracketed.
class AmbiguityError : public Error {
 public:
  AmbiguityError(const std::string& what, std::vector<double> roots)
      : Error(what), roots_(std::move(roots)) {}
  const std::vector<double>& roots() const { return roots_; }

 private:
  std::vector<double> roots_;
};

}  // namespace skewinfo
