#pragma once

#include "sstokes/femspace.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace sstokes {

/// SplitMix64 finalizer. Used to derive independent generator seeds from
/// (experiment seed, sample index).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t sample) {
  return splitmix64(splitmix64(base_seed) ^ splitmix64(sample + 0x632BE59BD9B4E019ULL));
}

/// Standard normal stream, version 1.
///
/// std::mt19937_64 (output fixed by the C++ standard) seeded with
/// sample_seed(seed, sample). Each pair of 64-bit outputs (a, b) maps to
/// u1 = ((a >> 11) + 1) * 2^-53 in (0, 1] and u2 = (b >> 11) * 2^-53 in [0, 1),
/// and Box-Muller yields sqrt(-2 ln u1) cos(2 pi u2) followed by
/// sqrt(-2 ln u1) sin(2 pi u2).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t sample) : engine_(sample_seed(seed, sample)) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
    const double u1 = static_cast<double>((engine_() >> 11) + 1) * scale;
    const double u2 = static_cast<double>(engine_() >> 11) * scale;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Brownian increments on the finest uniform grid of [0, T].
struct WienerPath {
  double T = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
  Vector<double> increments;

  int fine_steps() const { return static_cast<int>(increments.size()); }
};

inline WienerPath generate_path(std::uint64_t seed, std::uint64_t sample, int fine_steps, double T) {
  if (fine_steps < 1) {
    throw std::invalid_argument("generate_path: fine step count must be >= 1");
  }
  if (!(T > 0.0)) {
    throw std::invalid_argument("generate_path: horizon must be positive");
  }
  WienerPath path;
  path.T = T;
  path.seed = seed;
  path.sample = sample;
  path.increments.resize(fine_steps);
  NormalStream normals(seed, sample);
  const double sd = std::sqrt(T / fine_steps);
  for (int i = 0; i < fine_steps; ++i) {
    path.increments(i) = sd * normals.next();
  }
  return path;
}

/// Pairwise (binary tree) sum. For power-of-two lengths the tree matches
/// repeated halving, so coarsening by 4 equals coarsening by 2 twice, bit for bit.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() == 1) {
    return values[0];
  }
  const std::size_t mid = values.size() / 2;
  return pairwise_sum(values.first(mid)) + pairwise_sum(values.subspan(mid));
}

/// Increments of the same path on a grid of `steps` intervals; `steps` must
/// divide the fine step count.
inline Vector<double> coarse_increments(const WienerPath& path, int steps) {
  const int fine = path.fine_steps();
  if (steps < 1 || fine % steps != 0) {
    throw std::invalid_argument("coarse_increments: " + std::to_string(steps) +
                                " does not divide the fine step count " + std::to_string(fine));
  }
  const int ratio = fine / steps;
  Vector<double> coarse(steps);
  const std::span<const double> all(path.increments.data(), static_cast<std::size_t>(fine));
  for (int j = 0; j < steps; ++j) {
    coarse(j) = pairwise_sum(all.subspan(static_cast<std::size_t>(j) * ratio, ratio));
  }
  return coarse;
}

/// The iterated Ito integral over one step: ((dW)^2 - k) / 2.
template <typename Scalar>
Scalar milstein_weight(Scalar dW, Scalar k) {
  return (dW * dW - k) / Scalar(2);
}

/// Diffusion coefficient acting on velocity coefficient vectors:
/// diffusion(u) = G(u) and milstein_term(u) = DG(u) G(u).
template <typename Model, typename Scalar = double>
concept NoiseModel = requires(const Model& m, const Vector<Scalar>& u) {
  { m.diffusion(u) } -> std::convertible_to<Vector<Scalar>>;
  { m.milstein_term(u) } -> std::convertible_to<Vector<Scalar>>;
  { m.lipschitz_constant() } -> std::convertible_to<Scalar>;
};

/// G(u) = alpha u, hence DG(u) G(u) = alpha^2 u. Maps discretely
/// divergence-free fields to discretely divergence-free fields.
template <typename Scalar = double>
struct LinearNoise {
  Scalar alpha = 0;

  Vector<Scalar> diffusion(const Vector<Scalar>& u) const { return alpha * u; }
  Vector<Scalar> milstein_term(const Vector<Scalar>& u) const { return (alpha * alpha) * u; }
  Scalar lipschitz_constant() const { return alpha < 0 ? -alpha : alpha; }
};

static_assert(NoiseModel<LinearNoise<double>, double>);

}  // namespace sstokes
