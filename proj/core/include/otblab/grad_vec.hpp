#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace otblab {

/// Flat vector in policy-parameter space (score functions, gradients).
class GradVec {
 public:
  GradVec() = default;
  explicit GradVec(std::size_t size) : values_(size, 0.0) {}
  explicit GradVec(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }

  GradVec& operator+=(const GradVec& other);
  GradVec& operator-=(const GradVec& other);
  GradVec& operator*=(double scale);

  /// this += scale * other
  void axpy(double scale, const GradVec& other);
  void set_zero();

  double dot(const GradVec& other) const;
  double squared_norm() const;
  double norm() const;
  double max_abs() const;
  bool all_finite() const;

 private:
  std::vector<double> values_;
};

GradVec operator+(GradVec lhs, const GradVec& rhs);
GradVec operator-(GradVec lhs, const GradVec& rhs);
GradVec operator*(double scale, GradVec v);

/// max_i |a_i - b_i|; sizes must agree.
double max_abs_diff(const GradVec& a, const GradVec& b);

}  // namespace otblab
