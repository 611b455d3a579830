#include "adafuse/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "adafuse/errors.hpp"

namespace adafuse {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace

double dot_accum(const real* a, const real* b, std::size_t n) {
  // Four independent lanes, combined pairwise at the end. The order is part
  // of the determinism contract, not a tuning knob.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
    s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
    s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
  }
  for (; i < n; ++i) {
    s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return (s0 + s1) + (s2 + s3);
}

double dot(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("dot: dim mismatch " + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()));
  }
  return dot_accum(a.data(), b.data(), a.dim());
}

double norm(const Vector& v) {
  return std::sqrt(dot_accum(v.data(), v.data(), v.dim()));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " incompatible with " +
                     shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        acc += static_cast<double>(a.at(i, k)) * static_cast<double>(b.at(k, j));
      }
      out.at(i, j) = static_cast<real>(acc);
    }
  }
  return out;
}

Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.dim()) {
    throw ShapeError("matvec: " + shape_str(a) + " incompatible with vector " +
                     std::to_string(x.dim()));
  }
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    out[i] = static_cast<real>(dot_accum(a.row(i), x.data(), a.cols()));
  }
  return out;
}

Vector matvec_transposed(const Matrix& a, const Vector& y) {
  if (a.rows() != y.dim()) {
    throw ShapeError("matvec_transposed: " + shape_str(a) +
                     " incompatible with vector " + std::to_string(y.dim()));
  }
  Vector out(a.cols());
  // Column-wise accumulation in double, one pass over the matrix.
  std::vector<double> acc(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const real* row = a.row(i);
    const double yi = static_cast<double>(y[i]);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      acc[j] += yi * static_cast<double>(row[j]);
    }
  }
  for (std::size_t j = 0; j < a.cols(); ++j) {
    out[j] = static_cast<real>(acc[j]);
  }
  return out;
}

void add_outer(Matrix& acc, const Vector& y, const Vector& x) {
  if (acc.rows() != y.dim() || acc.cols() != x.dim()) {
    throw ShapeError("add_outer: acc " + shape_str(acc) + " vs outer " +
                     std::to_string(y.dim()) + "x" + std::to_string(x.dim()));
  }
  for (std::size_t i = 0; i < y.dim(); ++i) {
    real* row = acc.row(i);
    const real yi = y[i];
    for (std::size_t j = 0; j < x.dim(); ++j) {
      row[j] += yi * x[j];
    }
  }
}

Vector add(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("add: dim mismatch " + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()));
  }
  Vector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector sub(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("sub: dim mismatch " + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()));
  }
  Vector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector scale(const Vector& v, real s) {
  Vector out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] = v[i] * s;
  return out;
}

void axpy(Vector& acc, real s, const Vector& v) {
  if (acc.dim() != v.dim()) {
    throw ShapeError("axpy: dim mismatch " + std::to_string(acc.dim()) +
                     " vs " + std::to_string(v.dim()));
  }
  for (std::size_t i = 0; i < v.dim(); ++i) acc[i] += s * v[i];
}

Vector hadamard(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("hadamard: dim mismatch " + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()));
  }
  Vector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] * b[i];
  return out;
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector gelu(const Vector& x) {
  Vector out(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) {
    out[i] = static_cast<real>(gelu(static_cast<double>(x[i])));
  }
  return out;
}

Vector gelu_grad(const Vector& x) {
  Vector out(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) {
    out[i] = static_cast<real>(gelu_grad(static_cast<double>(x[i])));
  }
  return out;
}

Vector softmax(const Vector& logits) {
  if (logits.dim() == 0) {
    throw ShapeError("softmax: empty input");
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.dim(); ++i) {
    max_logit = std::max(max_logit, static_cast<double>(logits[i]));
  }
  std::vector<double> e(logits.dim());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.dim(); ++i) {
    e[i] = std::exp(static_cast<double>(logits[i]) - max_logit);
    sum += e[i];
  }
  Vector out(logits.dim());
  for (std::size_t i = 0; i < logits.dim(); ++i) {
    out[i] = static_cast<real>(e[i] / sum);
  }
  return out;
}

Vector l2_normalize(const Vector& v) {
  if (v.dim() == 0) {
    throw ShapeError("l2_normalize: empty input");
  }
  const double n = norm(v);
  if (n < kDegenerateNorm) {
    throw DegenerateVectorError("l2_normalize: norm " + std::to_string(n) +
                                " below " + std::to_string(kDegenerateNorm));
  }
  Vector out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) {
    out[i] = static_cast<real>(static_cast<double>(v[i]) / n);
  }
  return out;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("cosine_similarity: dim mismatch " +
                     std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  const double na = norm(a);
  const double nb = norm(b);
  if (na < kDegenerateNorm || nb < kDegenerateNorm) {
    throw DegenerateVectorError("cosine_similarity: zero-norm operand");
  }
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

bool all_finite(const Vector& v) {
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (!std::isfinite(static_cast<double>(v[i]))) return false;
  }
  return true;
}

bool all_finite(const Matrix& m) {
  const real* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(static_cast<double>(p[i]))) return false;
  }
  return true;
}

} // namespace adafuse
