// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "geosearch/error.hpp"
#include "geosearch/text.hpp"

namespace geosearch {

namespace {

constexpr double kZeroNorm = 1e-12;
constexpr int kMaxSampleRetries = 8;

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "dot of length " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

UnitAnchor UnitAnchor::from_unit(std::vector<double> coords) {
  if (coords.size() < 2) {
    throw Error(ErrorCode::kInvalidDims, "anchor dimension must be >= 2");
  }
  const double n = norm(coords);
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    throw Error(ErrorCode::kInvalidArgument,
                "anchor coordinates are not unit length (norm " + std::to_string(n) + ")");
  }
  return UnitAnchor(std::move(coords));
}

double UnitAnchor::dot(const UnitAnchor& other) const {
  return geosearch::dot(coords_, other.coords_);
}

UnitAnchor normalize(std::span<const double> v) {
  if (v.size() < 2) throw Error(ErrorCode::kInvalidDims, "anchor dimension must be >= 2");
  const double n = norm(v);
  if (!(n > kZeroNorm)) throw Error(ErrorCode::kZeroVector, "cannot normalize a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return UnitAnchor(std::move(out));
}

TangentVector tangent_project(const UnitAnchor& z, std::span<const double> v) {
  const double along = dot(z.coords(), v);
  std::vector<double> out(v.begin(), v.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= along * z[i];
  return TangentVector{std::move(out), z};
}

TangentVector sample_tangent(const UnitAnchor& z, RandomStream& stream) {
  std::vector<double> eps(z.dim());
  for (double& x : eps) x = stream.normal();
  return tangent_project(z, eps);
}

Perturbation perturb(const UnitAnchor& z, double sigma, RandomStream& stream) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma must be finite and >= 0");
  }
  for (int attempt = 0; attempt < kMaxSampleRetries; ++attempt) {
    TangentVector v = sample_tangent(z, stream);
    std::vector<double> moved(z.coords().begin(), z.coords().end());
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += sigma * v.coords[i];
    if (norm(moved) > kZeroNorm) {
      UnitAnchor a = sigma == 0.0 ? z : normalize(moved);
      return Perturbation{std::move(v), std::move(a)};
    }
  }
  throw Error(ErrorCode::kDegenerateSample,
              "perturbation vanished on " + std::to_string(kMaxSampleRetries) + " draws");
}

UnitAnchor sample_around(const UnitAnchor& z, double sigma, RandomStream& stream) {
  if (sigma == 0.0) return z;
  return perturb(z, sigma, stream).anchor;
}

double uniformity_penalty(const UnitAnchor& a, const UnitAnchor& z, double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "delta must lie in [0, 1)");
  }
  return std::max(0.0, a.dot(z) - delta);
}

std::vector<double> log_map_direction(const UnitAnchor& z, std::span<const double> candidate) {
  TangentVector t = tangent_project(z, candidate);
  const double n = norm(t.coords);
  if (!(n > kZeroNorm)) return {};
  for (double& x : t.coords) x /= n;
  return std::move(t.coords);
}

ConeConstraint ConeConstraint::make(const TangentVector& direction, double half_angle) {
  if (!(half_angle > 0.0 && half_angle <= std::numbers::pi)) {
    throw Error(ErrorCode::kInvalidArgument, "cone half-angle must lie in (0, pi]");
  }
  std::vector<double> unit = log_map_direction(direction.base, direction.coords);
  if (unit.empty()) throw Error(ErrorCode::kZeroVector, "cone target direction is zero");
  return ConeConstraint{TangentVector{std::move(unit), direction.base}, half_angle};
}

bool hard_cone_accept(const UnitAnchor& candidate, const UnitAnchor& z,
                      const ConeConstraint& constraint) {
  const std::vector<double> dir = log_map_direction(z, candidate.coords());
  if (dir.empty()) return false;
  if (constraint.half_angle >= std::numbers::pi) return true;
  return dot(dir, constraint.target.coords) >= std::cos(constraint.half_angle);
}

UnitAnchor random_anchor(std::size_t dim, RandomStream& stream) {
  std::vector<double> v(dim);
  for (int attempt = 0; attempt < kMaxSampleRetries; ++attempt) {
    for (double& x : v) x = stream.normal();
    if (norm(v) > kZeroNorm) return normalize(v);
  }
  throw Error(ErrorCode::kDegenerateSample, "random anchor draw vanished");
}

double AcceptanceRow::standard_error() const {
  if (n_samples == 0) return 0.0;
  return std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(n_samples));
}

std::vector<AcceptanceRow> acceptance_decay_experiment(std::vector<std::size_t> dims,
                                                       double phi, double sigma,
                                                       std::uint64_t n_samples,
                                                       std::uint64_t seed) {
  for (std::size_t d : dims) {
    if (d < 3) throw Error(ErrorCode::kInvalidDims, "dimension " + std::to_string(d) + " < 3");
  }
  if (n_samples == 0) throw Error(ErrorCode::kInvalidArgument, "n_samples must be positive");
  std::sort(dims.begin(), dims.end());

  std::vector<AcceptanceRow> rows;
  rows.reserve(dims.size());
  for (std::size_t d : dims) {
    RandomStream setup(seed, {0xACCE, d, 0});
    const UnitAnchor center = random_anchor(d, setup);
    const ConeConstraint cone = ConeConstraint::make(sample_tangent(center, setup), phi);

    RandomStream proposals(seed, {0xACCE, d, 1});
    std::uint64_t accepted = 0;
    for (std::uint64_t i = 0; i < n_samples; ++i) {
      if (hard_cone_accept(sample_around(center, sigma, proposals), center, cone)) ++accepted;
    }

    AcceptanceRow row;
    row.d_z = d;
    row.n_samples = n_samples;
    row.accepted = accepted;
    row.alpha = static_cast<double>(accepted) / static_cast<double>(n_samples);
    row.expected_proposals =
        accepted == 0 ? std::numeric_limits<double>::infinity() : 1.0 / row.alpha;
    row.phi = phi;
    row.sigma = sigma;
    row.seed = seed;
    rows.push_back(row);
  }
  return rows;
}

void write_acceptance_csv(std::ostream& out, std::span<const AcceptanceRow> rows) {
  out << "d_z,alpha,expected_proposals,n_samples,phi,sigma,seed\n";
  for (const AcceptanceRow& r : rows) {
    out << r.d_z << ',' << format_real(r.alpha) << ',' << format_real(r.expected_proposals) << ','
        << r.n_samples << ',' << format_real(r.phi) << ',' << format_real(r.sigma) << ',' << r.seed
        << '\n';
  }
}

}  // namespace geosearch
