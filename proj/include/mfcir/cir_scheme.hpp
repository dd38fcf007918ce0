#pragma once
// Drift-implicit Euler scheme for the transformed equation
//
//   dz = [ (m + 1/2) / z - (k/2) z ] dt + dM,   z = (2/sigma) sqrt(r),
//   m  = (2 k theta - sigma^2) / sigma^2,
//
// and the map back to the short rate r = (sigma z / 2)^2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"

namespace mfcir {

//===========================================================================//
// CirParams                                                                 //
//===========================================================================//
class CirParams {
 public:
  CirParams(double k, double theta, double sigma, double r0)
      : k_(k), theta_(theta), sigma_(sigma), r0_(r0) {
    auto check = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string(name) + ": must be positive and finite");
    };
    check(k, "k");
    check(theta, "theta");
    check(sigma, "sigma");
    check(r0, "r0");
    m_ = (2.0 * k * theta - sigma * sigma) / (sigma * sigma);
  }

  double k() const noexcept { return k_; }
  double theta() const noexcept { return theta_; }
  double sigma() const noexcept { return sigma_; }
  double r0() const noexcept { return r0_; }
  double m() const noexcept { return m_; }
  // 2 k theta > sigma^2, equivalently m > 0.
  bool feller_ok() const noexcept { return 2.0 * k_ * theta_ > sigma_ * sigma_; }
  // Root of the drift, sqrt((2m+1)/k); only meaningful for m > -1/2.
  double equilibrium_z() const { return std::sqrt((2.0 * m_ + 1.0) / k_); }

 private:
  double k_, theta_, sigma_, r0_;
  double m_;
};

//===========================================================================//
// Transform                                                                 //
//===========================================================================//
namespace detail {
// z_to_r without the positivity check, for trajectories that sit at m = -1/2.
inline double square_map(double z, double sigma) {
  const double half = 0.5 * sigma * z;
  return half * half;
}
}  // namespace detail

inline double z_to_r(double z, double sigma) {
  if (!(z > 0.0)) throw DomainError("z_to_r: z must be positive");
  if (!(sigma > 0.0)) throw DomainError("z_to_r: sigma must be positive");
  return detail::square_map(z, sigma);
}

inline double r_to_z(double r, double sigma) {
  if (!(r > 0.0)) throw DomainError("r_to_z: r must be positive");
  if (!(sigma > 0.0)) throw DomainError("r_to_z: sigma must be positive");
  return 2.0 * std::sqrt(r) / sigma;
}

//===========================================================================//
// Drift and implicit step                                                   //
//===========================================================================//
inline double drift_b(double z, const CirParams& p) {
  if (!(z > 0.0)) throw DomainError("drift_b: z must be positive");
  return (p.m() + 0.5) / z - 0.5 * p.k() * z;
}

// Solves z = z_prev + b(z) dt + dm for z > 0. Multiplying by z gives
// a z^2 - c z - d = 0 with a = 1 + k dt / 2, c = z_prev + dm, d = (m + 1/2) dt;
// a, d > 0 so exactly one root is positive.
// At m = -1/2 exactly the root degenerates to max(c, 0) / a, so z may touch
// zero and restart from it. Below that there may be no nonnegative root.
inline double implicit_step(double z_prev, double dm, double dt, const CirParams& p) {
  const bool boundary = p.m() == -0.5;
  if (!(z_prev > 0.0 || (boundary && z_prev == 0.0)))
    throw DomainError("implicit_step: z_prev must be positive");
  if (!(dt > 0.0)) throw DomainError("implicit_step: dt must be positive");
  if (!(p.m() >= -0.5)) throw DomainError("implicit_step: requires m >= -1/2");
  const double a = 1.0 + 0.5 * p.k() * dt;
  const double c = z_prev + dm;
  const double d = (p.m() + 0.5) * dt;
  const double disc = std::sqrt(c * c + 4.0 * a * d);
  // Pick the cancellation-free form by the sign of c.
  return c >= 0.0 ? (c + disc) / (2.0 * a) : (2.0 * d) / (disc - c);
}

// Runs the scheme from z0 over the increments; out receives n + 1 values.
inline void integrate_scheme(double z0, std::span<const double> increments, double dt,
                             const CirParams& p, std::span<double> out) {
  out[0] = z0;
  for (std::size_t i = 0; i < increments.size(); ++i)
    out[i + 1] = implicit_step(out[i], increments[i], dt, p);
}

//===========================================================================//
// Trajectory                                                                //
//===========================================================================//
struct Trajectory {
  GridSpec grid;
  std::vector<double> z_values;
  std::vector<double> r_values;
  CirParams params;
  std::uint64_t seed = 0;
};

// The scheme itself only needs m >= -1/2; whether the Feller condition is
// required is the caller's policy.
inline Trajectory simulate_z(const CirParams& params, const NoisePath& noise) {
  if (noise.increments.size() != noise.grid.steps())
    throw ConfigError("noise path length does not match its grid");
  const std::size_t n = noise.grid.steps();
  std::vector<double> z(n + 1);
  integrate_scheme(r_to_z(params.r0(), params.sigma()), noise.increments, noise.grid.dt(), params,
                   z);
  std::vector<double> r(n + 1);
  for (std::size_t i = 0; i <= n; ++i) r[i] = detail::square_map(z[i], params.sigma());
  return Trajectory{noise.grid, std::move(z), std::move(r), params, noise.seed};
}

// Piecewise-linear interpolation on (t_k, t_{k+1}], with the value z_0 at t = 0.
inline double interpolate(const Trajectory& traj, double t) {
  const GridSpec& g = traj.grid;
  if (!(t >= 0.0 && t <= g.horizon()))
    throw DomainError("interpolate: t = " + std::to_string(t) + " outside [0, T]");
  if (t == 0.0) return traj.z_values.front();
  const std::size_t n = g.steps();
  auto k = static_cast<std::size_t>(std::ceil(t / g.dt()));
  k = std::clamp<std::size_t>(k, 1, n) - 1;
  // Repair rounding in the index guess so that t_k < t <= t_{k+1}.
  while (k > 0 && t <= g.time(k)) --k;
  while (k + 1 < n && t > g.time(k + 1)) ++k;
  const double t0 = g.time(k), t1 = g.time(k + 1);
  if (t == t1) return traj.z_values[k + 1];
  const double z0 = traj.z_values[k], z1 = traj.z_values[k + 1];
  return z0 + (z1 - z0) / (t1 - t0) * (t - t0);
}

// z_0 + |b(z_0)| T + 2 sup|M|: every scheme value lies below this.
inline double uniform_bound(double z0, const CirParams& p, const NoisePath& noise) {
  double sup_m = 0.0, m = 0.0;
  for (double x : noise.increments) {
    m += x;
    sup_m = std::max(sup_m, std::abs(m));
  }
  return z0 + std::abs(drift_b(z0, p)) * noise.grid.horizon() + 2.0 * sup_m;
}

inline bool within_uniform_bound(std::span<const double> z, const CirParams& p,
                                 const NoisePath& noise, double slack = 1e-9) {
  const double bound = uniform_bound(z.front(), p, noise) + slack;
  return std::all_of(z.begin(), z.end(), [bound](double v) { return v <= bound; });
}

}  // namespace mfcir
