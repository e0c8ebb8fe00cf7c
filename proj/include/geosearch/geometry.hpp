// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "geosearch/random.hpp"

namespace geosearch {

/// A point on the unit sphere in R^d, d >= 2. Only constructible through
/// normalize() or from_unit(), so every instance satisfies |x| = 1 (1e-6).
class UnitAnchor {
 public:
  /// Wraps coordinates that are already unit length. Throws kInvalidDims for
  /// d < 2 and kInvalidArgument when the norm is off by more than 1e-6.
  static UnitAnchor from_unit(std::vector<double> coords);

  std::span<const double> coords() const noexcept { return coords_; }
  std::size_t dim() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const noexcept { return coords_[i]; }
  double dot(const UnitAnchor& other) const;

  bool operator==(const UnitAnchor&) const = default;

 private:
  explicit UnitAnchor(std::vector<double> coords) : coords_(std::move(coords)) {}
  friend UnitAnchor normalize(std::span<const double> v);

  std::vector<double> coords_;
};

/// A vector in the tangent space of `base`: coords . base = 0 (1e-9).
struct TangentVector {
  std::vector<double> coords;
  UnitAnchor base;
};

/// Half-angle cone around a unit tangent direction. Used as the hard
/// feasibility set in the acceptance-rate experiment.
struct ConeConstraint {
  TangentVector target;  // unit length
  double half_angle;     // radians, (0, pi]

  static ConeConstraint make(const TangentVector& direction, double half_angle);
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

/// v / |v|. Throws kZeroVector when |v| <= 1e-12.
UnitAnchor normalize(std::span<const double> v);

/// Removes the component of v along z.
TangentVector tangent_project(const UnitAnchor& z, std::span<const double> v);

/// A standard normal draw projected onto the tangent space of z.
TangentVector sample_tangent(const UnitAnchor& z, RandomStream& stream);

struct Perturbation {
  TangentVector direction;  // tangent draw before scaling
  UnitAnchor anchor;        // normalize(z + sigma * direction)
};

/// Tangent-space perturbation followed by re-normalization. Retries up to 8
/// draws if z + sigma*v vanishes, then throws kDegenerateSample.
Perturbation perturb(const UnitAnchor& z, double sigma, RandomStream& stream);

/// perturb(...).anchor; returns z unchanged when sigma == 0.
UnitAnchor sample_around(const UnitAnchor& z, double sigma, RandomStream& stream);

/// Hinge max(0, a.z - delta).
double uniformity_penalty(const UnitAnchor& a, const UnitAnchor& z, double delta);

/// Direction of `candidate` as seen from `z` (normalized log-map direction).
/// Returns an empty vector when candidate = +-z.
std::vector<double> log_map_direction(const UnitAnchor& z, std::span<const double> candidate);

/// True iff the tangent direction of candidate relative to z lies within the
/// cone. candidate = +-z is rejected.
bool hard_cone_accept(const UnitAnchor& candidate, const UnitAnchor& z,
                      const ConeConstraint& constraint);

/// Uniform random point on the sphere.
UnitAnchor random_anchor(std::size_t dim, RandomStream& stream);

struct AcceptanceRow {
  std::size_t d_z = 0;
  double alpha = 0.0;
  double expected_proposals = 0.0;  // +inf when alpha == 0
  std::uint64_t n_samples = 0;
  std::uint64_t accepted = 0;
  double phi = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  /// Binomial standard error of alpha.
  double standard_error() const;
};

/// Monte Carlo acceptance rate of hard cone filtering under sample_around
/// proposals, one row per dimension in ascending order. Each dimension gets
/// its own random center and cone target. Throws kInvalidDims if any d < 3.
std::vector<AcceptanceRow> acceptance_decay_experiment(std::vector<std::size_t> dims,
                                                       double phi, double sigma,
                                                       std::uint64_t n_samples,
                                                       std::uint64_t seed);

/// Header `d_z,alpha,expected_proposals,n_samples,phi,sigma,seed`.
void write_acceptance_csv(std::ostream& out, std::span<const AcceptanceRow> rows);

}  // namespace geosearch
