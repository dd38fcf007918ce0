#pragma once
// Harnesses for positivity audits, self-convergence order estimation,
// Monte Carlo statistics and bracket ensembles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cir_scheme.hpp"
#include "core.hpp"
#include "mixed_path.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "roughpath_checks.hpp"
#include "stats.hpp"

namespace mfcir {

// Seeds s_i = derive_seed(master, i) for i = 0..count-1.
inline std::vector<std::uint64_t> derive_seeds(std::uint64_t master, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = derive_seed(master, i);
  return seeds;
}

//===========================================================================//
// Self-convergence                                                          //
//===========================================================================//
// How a coarse trajectory is compared with the reference:
//   interpolated - sup over every reference grid point of the piecewise-linear
//                  interpolant of z^n against z^ref (the uniform norm on [0,T]
//                  as resolved by the reference grid);
//   grid_points  - sup over the coarse grid points only.
enum class ErrorNorm { interpolated, grid_points };

struct ConvergenceReport {
  ErrorNorm norm = ErrorNorm::interpolated;
  std::vector<std::size_t> n_list;
  std::vector<double> sup_errors;  // median over seeds
  std::vector<double> q25;
  std::vector<double> q75;
  std::vector<std::vector<double>> per_seed;  // [n index][seed index]
  double fitted_order = std::numeric_limits<double>::quiet_NaN();
  double fit_intercept = std::numeric_limits<double>::quiet_NaN();
  double fit_r2 = std::numeric_limits<double>::quiet_NaN();
  std::size_t excluded_zero_errors = 0;  // n values left out of the fit
  std::size_t n_ref = 0;
  std::vector<std::uint64_t> seeds_used;
  std::size_t bound_violations = 0;  // trajectories above the uniform bound
  // Node-only errors (median over seeds) and their fitted order, always
  // reported alongside the primary norm.
  std::vector<double> node_sup_errors;
  double node_fitted_order = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

struct OrderFit {
  double order, intercept, r2;
  std::size_t excluded;
};

// Fits log(error) = intercept - order * log(n), skipping zero errors.
inline OrderFit fit_order(std::span<const std::size_t> n_list, std::span<const double> errors) {
  std::vector<double> log_n, log_e;
  std::size_t excluded = 0;
  for (std::size_t j = 0; j < n_list.size(); ++j) {
    if (errors[j] > 0.0) {
      log_n.push_back(std::log(static_cast<double>(n_list[j])));
      log_e.push_back(std::log(errors[j]));
    } else {
      ++excluded;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (log_n.size() < 2) return {nan, nan, nan, excluded};
  const auto fit = stats::least_squares(log_n, log_e);
  return {-fit.slope, fit.intercept, fit.r2, excluded};
}

}  // namespace detail

// For each seed the mixed driver is drawn once at n_ref and aggregated to
// every n in n_list; z^n is compared with z^{n_ref} in the chosen norm.
// Errors are aggregated by median across seeds and the order is minus the slope of log(median error) against log(n).
inline ConvergenceReport run_convergence(const CirParams& params, const MixedSpec& spec,
                                         double horizon, std::span<const std::size_t> n_list,
                                         std::size_t n_ref, std::span<const std::uint64_t> seeds,
                                         ErrorNorm norm = ErrorNorm::interpolated,
                                         FbmMethod method = FbmMethod::automatic) {
  if (!params.feller_ok())
    throw ConfigError("convergence study requires the Feller condition 2 k theta > sigma^2");
  if (n_list.empty()) throw ConfigError("n-list: must not be empty");
  if (seeds.empty()) throw ConfigError("seeds: need at least one seed");
  const std::size_t n_max = *std::max_element(n_list.begin(), n_list.end());
  if (n_ref < 8 * n_max)
    throw ConfigError("n-ref: must be at least 8 x max(n-list) = " + std::to_string(8 * n_max));
  for (std::size_t n : n_list)
    if (n == 0 || n_ref % n != 0)
      throw ConfigError("n-list: n = " + std::to_string(n) + " does not divide n-ref = " +
                        std::to_string(n_ref));

  const MixedPathBuilder builder(spec, GridSpec(horizon, n_ref), method);
  const double z0 = r_to_z(params.r0(), params.sigma());

  ConvergenceReport rep;
  rep.norm = norm;
  rep.n_list.assign(n_list.begin(), n_list.end());
  rep.n_ref = n_ref;
  rep.seeds_used.assign(seeds.begin(), seeds.end());
  rep.per_seed.assign(n_list.size(), std::vector<double>(seeds.size(), 0.0));
  std::vector<std::vector<double>> node_errors(n_list.size(), std::vector<double>(seeds.size()));
  std::vector<std::size_t> violations(seeds.size(), 0);

  parallel_for(seeds.size(), [&](std::size_t s) {
    const CoupledNoise noise = derive_coupled(builder, n_list, seeds[s]);
    std::vector<double> z_ref(n_ref + 1);
    integrate_scheme(z0, noise.fine.increments, noise.fine.grid.dt(), params, z_ref);
    if (!within_uniform_bound(z_ref, params, noise.fine)) ++violations[s];
    for (std::size_t j = 0; j < n_list.size(); ++j) {
      const NoisePath& coarse = noise.view(n_list[j]);
      const std::size_t n = coarse.grid.steps();
      std::vector<double> z(n + 1);
      integrate_scheme(z0, coarse.increments, coarse.grid.dt(), params, z);
      if (!within_uniform_bound(z, params, coarse)) ++violations[s];
      const std::size_t ratio = n_ref / n;
      double node_err = 0.0, interp_err = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        node_err = std::max(node_err, std::abs(z[k] - z_ref[k * ratio]));
        const double slope = z[k + 1] - z[k];
        for (std::size_t i = 0; i < ratio; ++i) {
          const double frac = static_cast<double>(i) / static_cast<double>(ratio);
          interp_err = std::max(interp_err, std::abs(z[k] + slope * frac - z_ref[k * ratio + i]));
        }
      }
      const double last = std::abs(z[n] - z_ref[n_ref]);
      node_err = std::max(node_err, last);
      interp_err = std::max(interp_err, last);
      node_errors[j][s] = node_err;
      rep.per_seed[j][s] = norm == ErrorNorm::interpolated ? interp_err : node_err;
    }
  });

  for (auto v : violations) rep.bound_violations += v;
  for (std::size_t j = 0; j < n_list.size(); ++j) {
    rep.sup_errors.push_back(stats::median(rep.per_seed[j]));
    rep.q25.push_back(stats::quantile(rep.per_seed[j], 0.25));
    rep.q75.push_back(stats::quantile(rep.per_seed[j], 0.75));
    rep.node_sup_errors.push_back(stats::median(node_errors[j]));
  }
  const auto fit = detail::fit_order(rep.n_list, rep.sup_errors);
  rep.fitted_order = fit.order;
  rep.fit_intercept = fit.intercept;
  rep.fit_r2 = fit.r2;
  rep.excluded_zero_errors = fit.excluded;
  rep.node_fitted_order = detail::fit_order(rep.n_list, rep.node_sup_errors).order;
  return rep;
}

//===========================================================================//
// Positivity audit                                                          //
//===========================================================================//
struct PositivityReport {
  std::size_t n_paths = 0;
  double min_z = 0.0;
  double min_r = 0.0;
  bool feller_ok = false;
  CirParams params;
  GridSpec grid;
  std::size_t bound_violations = 0;
};

// Runs regardless of the Feller condition; the flag is only recorded.
inline PositivityReport run_positivity(const CirParams& params, const MixedSpec& spec,
                                       const GridSpec& grid, std::size_t n_paths,
                                       std::uint64_t master_seed,
                                       FbmMethod method = FbmMethod::automatic) {
  if (n_paths == 0) throw ConfigError("paths: must be positive");
  const MixedPathBuilder builder(spec, grid, method);
  const double z0 = r_to_z(params.r0(), params.sigma());
  std::vector<double> minima(n_paths);
  std::vector<char> violated(n_paths, 0);
  parallel_for(n_paths, [&](std::size_t i) {
    const NoisePath noise = builder.build(derive_seed(master_seed, i));
    std::vector<double> z(grid.steps() + 1);
    integrate_scheme(z0, noise.increments, grid.dt(), params, z);
    minima[i] = *std::min_element(z.begin(), z.end());
    violated[i] = !within_uniform_bound(z, params, noise);
  });
  PositivityReport rep{n_paths, 0.0, 0.0, params.feller_ok(), params, grid, 0};
  rep.min_z = *std::min_element(minima.begin(), minima.end());
  rep.min_r = detail::square_map(rep.min_z, params.sigma());
  for (char v : violated) rep.bound_violations += static_cast<std::size_t>(v);
  return rep;
}

//===========================================================================//
// Monte Carlo statistics of r                                               //
//===========================================================================//
struct McStats {
  double t_eval = 0.0;  // grid time actually used
  double sample_mean = 0.0;
  double sample_se = 0.0;
  std::size_t n_paths = 0;
  std::optional<double> closed_form_mean;
};

// E r_t = theta + (r0 - theta) e^{-k t} for the classical Brownian driver.
inline double classical_cir_mean(const CirParams& p, double t) {
  return p.theta() + (p.r0() - p.theta()) * std::exp(-p.k() * t);
}

inline McStats run_mc_stats(const CirParams& params, const MixedSpec& spec, const GridSpec& grid,
                            double t_eval, std::size_t n_paths, std::uint64_t master_seed,
                            FbmMethod method = FbmMethod::automatic) {
  if (!(t_eval > 0.0 && t_eval <= grid.horizon()))
    throw DomainError("t-eval must lie in (0, T]");
  if (n_paths == 0) throw ConfigError("paths: must be positive");
  const auto index = std::min<std::size_t>(
      grid.steps(), static_cast<std::size_t>(std::llround(t_eval / grid.dt())));
  const MixedPathBuilder builder(spec, grid, method);
  const double z0 = r_to_z(params.r0(), params.sigma());
  std::vector<double> r(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    const NoisePath noise = builder.build(derive_seed(master_seed, i));
    std::vector<double> z(index + 1);
    integrate_scheme(z0, std::span(noise.increments).first(index), grid.dt(), params, z);
    r[i] = detail::square_map(z[index], params.sigma());
  });
  McStats out;
  out.t_eval = grid.time(index);
  out.sample_mean = stats::mean(r);
  out.sample_se = std::sqrt(stats::variance(r) / static_cast<double>(n_paths));
  out.n_paths = n_paths;
  // The z-equation encodes [M]_t = t, so the classical CIR mean applies only
  // to the unit-weight Brownian driver.
  if (spec.weight_fbm == 0.0 && spec.weight_bm == 1.0)
    out.closed_form_mean = classical_cir_mean(params, out.t_eval);
  return out;
}

//===========================================================================//
// Bracket ensembles                                                         //
//===========================================================================//
struct BracketRow {
  std::size_t n = 0;  // outer steps
  std::size_t refinement = 1;
  double qv = 0.0;             // median over paths
  double bracket_value = 0.0;  // median over paths
};

// Draws each path at n_fine and evaluates the bracket estimator for every
// refinement level (outer n = n_fine / refinement).
inline std::vector<BracketRow> run_bracket(const MixedSpec& spec, const GridSpec& fine_grid,
                                           std::span<const std::size_t> refinements,
                                           std::size_t n_paths, std::uint64_t master_seed,
                                           FbmMethod method = FbmMethod::automatic) {
  if (n_paths == 0) throw ConfigError("paths: must be positive");
  for (std::size_t r : refinements)
    if (r == 0 || fine_grid.steps() % r != 0)
      throw ConfigError("refinement " + std::to_string(r) + " does not divide n = " +
                        std::to_string(fine_grid.steps()));
  const MixedPathBuilder builder(spec, fine_grid, method);
  std::vector<std::vector<BracketEstimate>> est(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    const NoisePath noise = builder.build(derive_seed(master_seed, i));
    for (std::size_t r : refinements) est[i].push_back(discrete_ito_iterated(noise, r));
  });
  std::vector<BracketRow> rows;
  for (std::size_t j = 0; j < refinements.size(); ++j) {
    std::vector<double> qv(n_paths), br(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
      qv[i] = est[i][j].qv_sum;
      br[i] = est[i][j].bracket_value;
    }
    rows.push_back({fine_grid.steps() / refinements[j], refinements[j], stats::median(qv),
                    stats::median(br)});
  }
  return rows;
}

// Quadratic variation of one mixed path per seed.
inline std::vector<double> qv_ensemble(const MixedSpec& spec, const GridSpec& grid,
                                       std::span<const std::uint64_t> seeds,
                                       FbmMethod method = FbmMethod::automatic) {
  const MixedPathBuilder builder(spec, grid, method);
  std::vector<double> out(seeds.size());
  parallel_for(seeds.size(),
               [&](std::size_t i) { out[i] = quadratic_variation(builder.build(seeds[i])); });
  return out;
}

}  // namespace mfcir
