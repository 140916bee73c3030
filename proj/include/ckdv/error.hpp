#ifndef CKDV_ERROR_HPP
#define CKDV_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ckdv {

/// Bad arguments or configuration detected before any computation.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical precondition on field data does not hold (decay, shapes,
/// degenerate normalizations).
class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Blow-up, non-finite values or other failure during a computation.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double t, std::size_t step = 0)
      : std::runtime_error(what), t_(t), step_(step) {}

  double time() const noexcept { return t_; }
  std::size_t step() const noexcept { return step_; }

 private:
  double t_;
  std::size_t step_;
};

}  // namespace ckdv

#endif  // CKDV_ERROR_HPP
