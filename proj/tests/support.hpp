// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-side oracles, written independently of the library code paths.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "geosearch/error.hpp"

namespace testing {

/// Haar-ish random rotation from the QR factorization of a Gaussian matrix.
inline Eigen::MatrixXd random_rotation(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd g(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) g(i, j) = n(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd diag = qr.matrixQR().diagonal();
  for (std::size_t j = 0; j < d; ++j) {
    if (diag(j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

inline std::vector<double> apply(const Eigen::MatrixXd& m, const std::vector<double>& v) {
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  Eigen::VectorXd y = m * x;
  return {y.data(), y.data() + y.size()};
}

inline std::vector<double> gaussian(std::size_t d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(d);
  for (double& x : v) x = n(rng);
  return v;
}

/// Binomial coefficient as a long double, by multiplication.
inline long double choose(std::size_t n, std::size_t k) {
  if (k > n) return 0.0L;
  long double r = 1.0L;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / i;
  return r;
}

/// Pass@k by enumerating every k-subset of the n trials whose successes are
/// the set bits of `mask`: the fraction of subsets holding a success, as an
/// exact ratio of integer counts.
inline double subset_pass_oracle(std::uint32_t mask, std::size_t n, std::size_t k) {
  std::uint64_t hit = 0;
  std::uint64_t total = 0;
  for (std::uint32_t sub = 0; sub < (1u << n); ++sub) {
    if (static_cast<std::size_t>(__builtin_popcount(sub)) != k) continue;
    ++total;
    if ((sub & mask) != 0) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

template <class F>
geosearch::ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const geosearch::Error& e) {
    return e.code();
  }
  throw std::logic_error("expected a geosearch::Error");
}

}  // namespace testing
