#pragma once

// Shared helpers for the test binaries: random matrices and naive oracles
// that deliberately avoid the library's own kernels.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "protodep/numkit.hpp"

namespace testsupport {

using protodep::numkit::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  protodep::numkit::Rng rng(seed);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(-scale, scale);
  return m;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double acc = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<double>(acc);
    }
  }
  return out;
}

/// Direct exp/sum evaluation in extended precision.
inline std::vector<double> naive_softmax(const std::vector<double>& row) {
  long double top = row.empty() ? 0.0L : row.front();
  for (double x : row) top = std::max<long double>(top, x);
  long double total = 0.0L;
  std::vector<long double> e;
  for (double x : row) {
    e.push_back(std::exp(static_cast<long double>(x) - top));
    total += e.back();
  }
  std::vector<double> out;
  for (long double v : e) out.push_back(static_cast<double>(v / total));
  return out;
}

inline double naive_bce(double p, double y) {
  const double eps = 1e-7;
  const double c = std::min(std::max(p, eps), 1.0 - eps);
  return -(y * std::log(c) + (1.0 - y) * std::log(1.0 - c));
}

/// Pairwise count: positives outranking negatives, ties as one half.
inline double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

}  // namespace testsupport
