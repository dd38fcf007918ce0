#pragma once
// Empirical checks of the bracket [M]_t = t and of the one-dimensional rough
// Ito formula, using left-point (Ito-type) iterated sums on a refined grid.

#include <algorithm>
#include <cmath>
#include <string>

#include "core.hpp"

namespace mfcir {

inline double quadratic_variation(const NoisePath& noise) {
  double qv = 0.0;
  for (double x : noise.increments) qv += x * x;
  return qv;
}

// Bracket over the outer grid, each outer interval covering `refinement`
// increments of the underlying fine path.
struct BracketEstimate {
  GridSpec grid;                    // outer grid
  double qv_sum = 0.0;              // sum of squared outer increments
  double iterated_correction = 0.0; // 2 * sum of iterated integrals
  double bracket_value = 0.0;       // qv_sum - iterated_correction
  std::size_t refinement = 1;
};

namespace detail {

inline std::size_t outer_steps(const NoisePath& fine, std::size_t refinement) {
  const std::size_t n = fine.grid.steps();
  if (refinement == 0 || n % refinement != 0)
    throw ConfigError("refinement " + std::to_string(refinement) +
                      " does not divide the fine step count " + std::to_string(n));
  return n / refinement;
}

// Visits each outer interval with (index, start value M_{t_i}, increment
// M_{t_i,t_{i+1}}, iterated sum  sum_j M_{t_i,s_j} (M_{s_{j+1}} - M_{s_j})).
template <typename Visit>
void for_each_outer(const NoisePath& fine, std::size_t refinement, Visit&& visit) {
  const std::size_t outer = outer_steps(fine, refinement);
  const auto& inc = fine.increments;
  double start = 0.0;
  for (std::size_t i = 0; i < outer; ++i) {
    double local = 0.0, iterated = 0.0;
    for (std::size_t j = 0; j < refinement; ++j) {
      const double d = inc[i * refinement + j];
      iterated += local * d;
      local += d;
    }
    visit(i, start, local, iterated);
    start += local;
  }
}

}  // namespace detail

inline BracketEstimate discrete_ito_iterated(const NoisePath& fine, std::size_t refinement) {
  const std::size_t outer = detail::outer_steps(fine, refinement);
  double qv = 0.0, iterated = 0.0;
  detail::for_each_outer(fine, refinement, [&](std::size_t, double, double dm, double it) {
    qv += dm * dm;
    iterated += it;
  });
  return BracketEstimate{GridSpec(fine.grid.horizon(), outer), qv, 2.0 * iterated,
                         qv - 2.0 * iterated, refinement};
}

// Both sides of f(M_T) = f(M_0) + int Df(M) dM + 1/2 int D^2 f(M) d[M], with the
// rough integral as the compensated sum  Df(M_{t_i}) M_{t_i,t_{i+1}} + D^2 f(M_{t_i}) IM_i
// and the bracket increment [M]_i = M_{t_i,t_{i+1}}^2 - 2 IM_i.
struct ItoCheck {
  double lhs = 0.0;             // f(M_T) - f(M_0)
  double rough_integral = 0.0;
  double bracket_term = 0.0;
  double scale = 0.0;           // sum of absolute values of all summed terms

  double residual() const { return std::abs(lhs - rough_integral - bracket_term); }
  double relative_residual() const {
    const double s = std::max({std::abs(lhs), scale});
    return s > 0.0 ? residual() / s : residual();
  }
};

template <typename F, typename DF, typename D2F>
ItoCheck ito_formula_check(const NoisePath& fine, std::size_t refinement, F f, DF df, D2F d2f) {
  ItoCheck out;
  double end = 0.0;
  detail::for_each_outer(fine, refinement, [&](std::size_t, double m, double dm, double it) {
    const double first = df(m) * dm + d2f(m) * it;
    const double second = 0.5 * d2f(m) * (dm * dm - 2.0 * it);
    out.rough_integral += first;
    out.bracket_term += second;
    out.scale += std::abs(first) + std::abs(second);
    end = m + dm;
  });
  out.lhs = f(end) - f(0.0);
  return out;
}

// f(x) = x^2: the identity is exact algebra, so only rounding remains.
inline ItoCheck ito_formula_check_square(const NoisePath& fine, std::size_t refinement) {
  return ito_formula_check(
      fine, refinement, [](double x) { return x * x; }, [](double x) { return 2.0 * x; },
      [](double) { return 2.0; });
}

inline double ito_formula_residual(const NoisePath& fine, std::size_t refinement) {
  return ito_formula_check_square(fine, refinement).residual();
}

}  // namespace mfcir
