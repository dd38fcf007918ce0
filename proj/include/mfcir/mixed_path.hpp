#pragma once
// Mixed drivers M = a B + b B^H and exact fine-to-coarse aggregation.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "gaussian_noise.hpp"
#include "random.hpp"

namespace mfcir {

struct MixedSpec {
  HurstParam hurst{0.75};
  double weight_bm = 1.0;
  double weight_fbm = 1.0;

  void validate() const {
    if (!std::isfinite(weight_bm)) throw ConfigError("weight-bm: must be finite");
    if (!std::isfinite(weight_fbm)) throw ConfigError("weight-fbm: must be finite");
  }
  NoiseKind kind() const noexcept {
    if (weight_fbm == 0.0) return NoiseKind::brownian;
    if (weight_bm == 0.0) return NoiseKind::fractional;
    return NoiseKind::mixed;
  }
};

// The two independent components of one mixed realization.
struct MixedComponents {
  NoisePath brownian;
  std::optional<NoisePath> fractional;  // absent when weight_fbm == 0
};

// Holds the (H, grid)-dependent fBm setup so that many seeds can be drawn.
// B and B^H come from the substreams stream::brownian and stream::fractional
// of the path seed.
class MixedPathBuilder {
 public:
  MixedPathBuilder(const MixedSpec& spec, const GridSpec& grid,
                   FbmMethod method = FbmMethod::automatic)
      : spec_(spec), grid_(grid) {
    spec.validate();
    if (spec.weight_fbm != 0.0) fbm_.emplace(spec.hurst, grid, method);
  }

  MixedComponents components(std::uint64_t seed) const {
    MixedComponents out{sample_brownian_increments(grid_, derive_seed(seed, stream::brownian)),
                        std::nullopt};
    if (fbm_) out.fractional = fbm_->sample(derive_seed(seed, stream::fractional));
    return out;
  }

  NoisePath build(std::uint64_t seed) const {
    auto parts = components(seed);
    std::vector<double> inc = std::move(parts.brownian.increments);
    for (auto& x : inc) x *= spec_.weight_bm;
    if (parts.fractional) {
      const auto& f = parts.fractional->increments;
      for (std::size_t i = 0; i < inc.size(); ++i) inc[i] += spec_.weight_fbm * f[i];
    }
    return NoisePath{grid_, std::move(inc), spec_.kind(), spec_.hurst.value(), seed};
  }

  const MixedSpec& spec() const noexcept { return spec_; }
  const GridSpec& grid() const noexcept { return grid_; }

 private:
  MixedSpec spec_;
  GridSpec grid_;
  std::optional<FbmSampler> fbm_;
};

inline NoisePath build_mixed(const MixedSpec& spec, const GridSpec& grid, std::uint64_t seed) {
  return MixedPathBuilder(spec, grid).build(seed);
}

//===========================================================================//
// Coupling across resolutions                                               //
//===========================================================================//
struct CoupledNoise {
  NoisePath fine;
  std::map<std::size_t, NoisePath> coarse_views;  // keyed by coarse step count

  const NoisePath& view(std::size_t n) const {
    if (n == fine.grid.steps()) return fine;
    auto it = coarse_views.find(n);
    if (it == coarse_views.end())
      throw ConfigError("no coupled view with n = " + std::to_string(n));
    return it->second;
  }
};

// Coarse increment k is the sum of fine increments k*r .. k*r + r-1.
inline NoisePath aggregate(const NoisePath& fine, std::size_t n_coarse) {
  const std::size_t n_fine = fine.grid.steps();
  if (n_coarse == 0 || n_fine % n_coarse != 0)
    throw ConfigError("coarse n = " + std::to_string(n_coarse) + " does not divide n_fine = " +
                      std::to_string(n_fine));
  const std::size_t ratio = n_fine / n_coarse;
  std::vector<double> inc(n_coarse, 0.0);
  for (std::size_t k = 0; k < n_coarse; ++k) {
    double sum = 0.0;
    for (std::size_t j = 0; j < ratio; ++j) sum += fine.increments[k * ratio + j];
    inc[k] = sum;
  }
  return NoisePath{GridSpec(fine.grid.horizon(), n_coarse), std::move(inc), fine.kind, fine.hurst,
                   fine.seed};
}

inline CoupledNoise couple(NoisePath fine, std::span<const std::size_t> coarse_list) {
  CoupledNoise out{std::move(fine), {}};
  for (std::size_t n : coarse_list) out.coarse_views.emplace(n, aggregate(out.fine, n));
  return out;
}

inline CoupledNoise derive_coupled(const MixedPathBuilder& fine_builder,
                                   std::span<const std::size_t> coarse_list, std::uint64_t seed) {
  const std::size_t n_fine = fine_builder.grid().steps();
  for (std::size_t n : coarse_list)
    if (n == 0 || n_fine % n != 0)
      throw ConfigError("coarse n = " + std::to_string(n) + " does not divide n_fine = " +
                        std::to_string(n_fine));
  return couple(fine_builder.build(seed), coarse_list);
}

inline CoupledNoise derive_coupled(const MixedSpec& spec, double horizon, std::size_t n_fine,
                                   std::span<const std::size_t> coarse_list, std::uint64_t seed) {
  for (std::size_t n : coarse_list)
    if (n == 0 || n_fine % n != 0)
      throw ConfigError("coarse n = " + std::to_string(n) + " does not divide n_fine = " +
                        std::to_string(n_fine));
  return derive_coupled(MixedPathBuilder(spec, GridSpec(horizon, n_fine)), coarse_list, seed);
}

}  // namespace mfcir
