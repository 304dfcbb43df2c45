#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace hpg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Raised for malformed inputs: bad dimensions, out-of-range parameters.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an optimization run produces non-finite parameters.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Policy parameter theta in R^N. Entries are always finite.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(Vector values) : values_(std::move(values)) {
    if (!values_.allFinite()) {
      throw ValidationError("ParamVector: non-finite entry");
    }
  }
  static ParamVector zeros(Eigen::Index n) { return ParamVector(Vector::Zero(n)); }
  static ParamVector scalar(double v) { return ParamVector(Vector::Constant(1, v)); }

  const Vector& values() const { return values_; }
  Eigen::Index dim() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

  // theta + step * direction, checked for finiteness.
  ParamVector shifted(const Vector& direction, double step = 1.0) const {
    return ParamVector(values_ + step * direction);
  }

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Vector values_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace hpg
