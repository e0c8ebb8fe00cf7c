// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/backend.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "geosearch/error.hpp"

namespace geosearch {

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale, RandomStream stream) {
  Matrix m(rows, cols);
  for (double& x : m.data) x = stream.normal() * scale;
  return m;
}

void orthonormalize_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* ri = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < i; ++j) {
      const double* rj = m.data.data() + j * m.cols;
      double proj = 0.0;
      for (std::size_t c = 0; c < m.cols; ++c) proj += ri[c] * rj[c];
      for (std::size_t c = 0; c < m.cols; ++c) ri[c] -= proj * rj[c];
    }
    double n = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) n += ri[c] * ri[c];
    n = std::sqrt(n);
    if (!(n > 1e-12)) throw Error(ErrorCode::kDegenerateSample, "projection rows are dependent");
    for (std::size_t c = 0; c < m.cols; ++c) ri[c] /= n;
  }
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace

std::vector<double> Matrix::apply(std::span<const double> x) const {
  if (x.size() != cols) {
    throw Error(ErrorCode::kShapeMismatch,
                "matrix " + shape(*this) + " applied to vector of length " +
                    std::to_string(x.size()));
  }
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row_ptr = data.data() + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += row_ptr[c] * x[c];
    out[r] = s;
  }
  return out;
}

bool Matrix::is_zero() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return v == 0.0; });
}

void HiddenStates::push_back(std::span<const double> row) {
  if (row.size() != dim) {
    throw Error(ErrorCode::kShapeMismatch, "hidden state of length " +
                                               std::to_string(row.size()) + ", expected " +
                                               std::to_string(dim));
  }
  data.insert(data.end(), row.begin(), row.end());
}

InjectionSpec InjectionSpec::generate(std::size_t d_z, std::size_t d_h, std::size_t rank_r,
                                      std::size_t n_layers, std::uint64_t seed) {
  if (d_z < 2 || d_z > d_h) {
    throw Error(ErrorCode::kInvalidDims, "need 2 <= d_z <= d_h for an orthonormal projection");
  }
  if (rank_r == 0 || rank_r > d_h / 4) {
    throw Error(ErrorCode::kInvalidArgument, "rank_r must lie in [1, d_h/4]");
  }
  InjectionSpec spec;
  spec.d_z = d_z;
  spec.d_h = d_h;
  spec.rank_r = rank_r;
  spec.seed = seed;
  spec.w = gaussian_matrix(d_z, d_h, 1.0 / std::sqrt(static_cast<double>(d_h)),
                           RandomStream(seed, {'W'}));
  orthonormalize_rows(spec.w);
  spec.layers.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    spec.layers.push_back(InjectionLayer{
        gaussian_matrix(rank_r, d_z, 1.0 / std::sqrt(static_cast<double>(d_z)),
                        RandomStream(seed, {'A', l})),
        gaussian_matrix(d_h, rank_r, 1.0 / std::sqrt(static_cast<double>(rank_r)),
                        RandomStream(seed, {'B', l}))});
  }
  return spec;
}

InjectionSpec InjectionSpec::from_matrices(Matrix w, std::vector<InjectionLayer> layers,
                                           std::size_t rank_r, std::uint64_t seed) {
  InjectionSpec spec;
  spec.d_z = w.rows;
  spec.d_h = w.cols;
  spec.rank_r = rank_r;
  spec.seed = seed;
  if (spec.d_z < 2) throw Error(ErrorCode::kInvalidDims, "d_z must be >= 2");
  if (rank_r == 0 || rank_r > spec.d_h / 4) {
    throw Error(ErrorCode::kInvalidArgument, "rank_r must lie in [1, d_h/4]");
  }
  for (const InjectionLayer& layer : layers) {
    if (layer.a.rows != rank_r || layer.a.cols != spec.d_z || layer.b.rows != spec.d_h ||
        layer.b.cols != rank_r) {
      throw Error(ErrorCode::kShapeMismatch,
                  "injection layer shapes " + shape(layer.a) + ", " + shape(layer.b));
    }
  }
  spec.w = std::move(w);
  spec.layers = std::move(layers);
  return spec;
}

InjectionSpec InjectionSpec::zeroed() const {
  InjectionSpec out = *this;
  for (InjectionLayer& layer : out.layers) {
    std::fill(layer.a.data.begin(), layer.a.data.end(), 0.0);
    std::fill(layer.b.data.begin(), layer.b.data.end(), 0.0);
  }
  return out;
}

std::vector<double> InjectionSpec::total_injection(std::span<const double> anchor) const {
  std::vector<double> total(d_h, 0.0);
  for (const InjectionLayer& layer : layers) {
    const std::vector<double> delta = layer.b.apply(layer.a.apply(anchor));
    for (std::size_t i = 0; i < d_h; ++i) total[i] += delta[i];
  }
  return total;
}

UnitAnchor extract_anchor(std::span<const double> h_eoc, const InjectionSpec& spec) {
  for (double x : h_eoc) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidArgument, "h_eoc is not finite");
  }
  return normalize(spec.w.apply(h_eoc));
}

std::vector<double> inject(std::span<const double> h, const UnitAnchor& anchor,
                           const InjectionLayer& layer) {
  if (layer.b.rows != h.size() || layer.b.cols != layer.a.rows) {
    throw Error(ErrorCode::kShapeMismatch, "injector " + shape(layer.a) + ", " +
                                               shape(layer.b) + " on hidden of length " +
                                               std::to_string(h.size()));
  }
  const std::vector<double> delta = layer.b.apply(layer.a.apply(anchor.coords()));
  std::vector<double> out(h.begin(), h.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += delta[i];
  return out;
}

}  // namespace geosearch
