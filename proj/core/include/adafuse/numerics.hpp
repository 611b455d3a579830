#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "adafuse/real.hpp"

namespace adafuse {

// Dense vector, `real` storage. Immutable by convention once handed to a
// consumer; all free functions below return fresh values.
class Vector {
public:
  Vector() = default;
  explicit Vector(std::size_t dim) : data_(dim, real(0)) {}
  Vector(std::initializer_list<real> init) : data_(init) {}

  static Vector zeros(std::size_t dim) { return Vector(dim); }

  std::size_t dim() const { return data_.size(); }
  real operator[](std::size_t i) const { return data_[i]; }
  real& operator[](std::size_t i) { return data_[i]; }
  const real* data() const { return data_.data(); }
  real* data() { return data_.data(); }

  bool operator==(const Vector&) const = default;

private:
  std::vector<real> data_;
};

// Dense row-major matrix, `real` storage, double accumulation in every
// reduction that touches it.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, real(0)) {}

  static Matrix zeros(std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols);
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  real at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  real& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  const real* row(std::size_t r) const { return data_.data() + r * cols_; }
  real* row(std::size_t r) { return data_.data() + r * cols_; }
  const real* data() const { return data_.data(); }
  real* data() { return data_.data(); }

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<real> data_;
};

// Dot product of two length-n spans, accumulated in double with a fixed
// 4-lane summation order (deterministic for a given n).
double dot_accum(const real* a, const real* b, std::size_t n);

double dot(const Vector& a, const Vector& b);
double norm(const Vector& v);

Matrix matmul(const Matrix& a, const Matrix& b);
// a (m x n) * x (n) -> (m)
Vector matvec(const Matrix& a, const Vector& x);
// a^T (n x m) * y (m) -> (n)
Vector matvec_transposed(const Matrix& a, const Vector& y);
// acc += y * x^T, shapes (|y| x |x|)
void add_outer(Matrix& acc, const Vector& y, const Vector& x);

Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector scale(const Vector& v, real s);
// acc += s * v
void axpy(Vector& acc, real s, const Vector& v);
// elementwise product
Vector hadamard(const Vector& a, const Vector& b);

// Exact erf-based GELU: x * Phi(x) with Phi the standard normal CDF.
double gelu(double x);
// d gelu / dx = Phi(x) + x * phi(x)
double gelu_grad(double x);
// Branch-stable logistic sigmoid; no overflow anywhere on the real line.
double sigmoid(double x);

Vector gelu(const Vector& x);
Vector gelu_grad(const Vector& x);

// Max-subtracted softmax; entries positive, summing to 1.
Vector softmax(const Vector& logits);

// v / ||v||; throws DegenerateVectorError when ||v|| < kDegenerateNorm.
Vector l2_normalize(const Vector& v);

// Clamped to [-1, 1]; both inputs must have norm above kDegenerateNorm.
double cosine_similarity(const Vector& a, const Vector& b);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

} // namespace adafuse
