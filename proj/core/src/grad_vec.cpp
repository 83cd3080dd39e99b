#include "otblab/grad_vec.hpp"

#include <algorithm>
#include <cmath>

#include "otblab/common.hpp"

namespace otblab {

namespace {
void require_same_size(const GradVec& a, const GradVec& b) {
  if (a.size() != b.size()) throw Error("GradVec size mismatch");
}
}  // namespace

GradVec& GradVec::operator+=(const GradVec& other) {
  require_same_size(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

GradVec& GradVec::operator-=(const GradVec& other) {
  require_same_size(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

GradVec& GradVec::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

void GradVec::axpy(double scale, const GradVec& other) {
  require_same_size(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

void GradVec::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

double GradVec::dot(const GradVec& other) const {
  require_same_size(*this, other);
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) acc += values_[i] * other.values_[i];
  return acc;
}

double GradVec::squared_norm() const {
  double acc = 0.0;
  for (double v : values_) acc += v * v;
  return acc;
}

double GradVec::norm() const { return std::sqrt(squared_norm()); }

double GradVec::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool GradVec::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

GradVec operator+(GradVec lhs, const GradVec& rhs) { return lhs += rhs; }
GradVec operator-(GradVec lhs, const GradVec& rhs) { return lhs -= rhs; }
GradVec operator*(double scale, GradVec v) { return v *= scale; }

double max_abs_diff(const GradVec& a, const GradVec& b) {
  require_same_size(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace otblab
