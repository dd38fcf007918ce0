#pragma once
// Exact-covariance Brownian and fractional Brownian increments on uniform grids.
//
// Two fBm generators are provided and are interchangeable in distribution:
//   CholeskyFbm     - factorizes the covariance of the path values, O(n^3)
//                     setup, O(n^2) per sample; limited to n <= 2^11.
//   DaviesHarteFbm  - circulant embedding of the stationary increment
//                     autocovariance, O(n log n) per sample.
// Both precompute everything that depends only on (H, grid), so one instance
// can serve many seeds (and many threads; sampling is const).

#include <algorithm>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <fftw3.h>

#include "core.hpp"
#include "random.hpp"

namespace mfcir {

inline constexpr std::size_t cholesky_size_cap = std::size_t{1} << 11;
// Circulant eigenvalues in [-tol * max, 0) are rounding noise and clamped.
inline constexpr double embedding_negative_tolerance = 1e-8;

// Cov(B^H_s, B^H_t) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.
inline double fbm_covariance(HurstParam h, double s, double t) {
  if (!(s >= 0.0) || !(t >= 0.0))
    throw DomainError("fbm_covariance: times must be nonnegative");
  const double two_h = 2.0 * h.value();
  return 0.5 * (std::pow(s, two_h) + std::pow(t, two_h) - std::pow(std::abs(t - s), two_h));
}

// Autocovariance at lag j of fractional Gaussian noise with step dt.
inline double fgn_autocovariance(HurstParam h, double dt, std::size_t lag) {
  const double two_h = 2.0 * h.value();
  const double j = static_cast<double>(lag);
  const double lower = lag == 0 ? 1.0 : std::pow(j - 1.0, two_h);
  return 0.5 * std::pow(dt, two_h) *
         (std::pow(j + 1.0, two_h) - 2.0 * std::pow(j, two_h) + lower);
}

inline NoisePath sample_brownian_increments(const GridSpec& grid, std::uint64_t seed) {
  GaussianStream gauss(seed);
  const double scale = std::sqrt(grid.dt());
  std::vector<double> inc(grid.steps());
  for (auto& x : inc) x = scale * gauss.normal();
  return NoisePath{grid, std::move(inc), NoiseKind::brownian, 0.5, seed};
}

//===========================================================================//
// CholeskyFbm                                                               //
//===========================================================================//
class CholeskyFbm {
 public:
  CholeskyFbm(HurstParam h, const GridSpec& grid) : h_(h), grid_(grid) {
    const std::size_t n = grid.steps();
    if (n > cholesky_size_cap)
      throw ConfigError("Cholesky fBm generator limited to n <= " +
                        std::to_string(cholesky_size_cap) + " (got " + std::to_string(n) +
                        "); use the Davies-Harte generator");
    // Packed row-major lower triangle; row i starts at i(i+1)/2.
    factor_.resize(n * (n + 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
      double* row_i = &factor_[i * (i + 1) / 2];
      for (std::size_t j = 0; j <= i; ++j) {
        const double* row_j = &factor_[j * (j + 1) / 2];
        double sum = fbm_covariance(h, grid.time(i + 1), grid.time(j + 1));
        for (std::size_t p = 0; p < j; ++p) sum -= row_i[p] * row_j[p];
        if (i == j) {
          if (!(sum > 0.0)) throw CholeskyError(i, sum);
          row_i[i] = std::sqrt(sum);
        } else {
          row_i[j] = sum / row_j[j];
        }
      }
    }
  }

  NoisePath sample(std::uint64_t seed) const {
    const std::size_t n = grid_.steps();
    GaussianStream gauss(seed);
    std::vector<double> xi(n);
    for (auto& x : xi) x = gauss.normal();
    std::vector<double> inc(n);
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &factor_[i * (i + 1) / 2];
      double value = 0.0;
      for (std::size_t j = 0; j <= i; ++j) value += row[j] * xi[j];
      inc[i] = value - prev;
      prev = value;
    }
    return NoisePath{grid_, std::move(inc), NoiseKind::fractional, h_.value(), seed};
  }

  const GridSpec& grid() const noexcept { return grid_; }

 private:
  HurstParam h_;
  GridSpec grid_;
  std::vector<double> factor_;
};

//===========================================================================//
// DaviesHarteFbm                                                            //
//===========================================================================//
namespace detail {

// FFTW planning is not thread-safe; execution with new arrays is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

class ForwardPlan {
 public:
  explicit ForwardPlan(std::size_t n) : size_(n) {
    FftwBuffer in(n), out(n);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), in.data, out.data, FFTW_FORWARD,
                             FFTW_ESTIMATE);
    if (!plan_) throw NumericalError("FFTW failed to create a plan of size " + std::to_string(n));
  }
  ~ForwardPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  ForwardPlan(const ForwardPlan&) = delete;
  ForwardPlan& operator=(const ForwardPlan&) = delete;

  // Buffers must come from FftwBuffer (fftw_malloc alignment).
  void execute(fftw_complex* in, fftw_complex* out) const {
    fftw_execute_dft(plan_, in, out);
  }
  std::size_t size() const noexcept { return size_; }

 private:
  std::size_t size_;
  fftw_plan plan_;
};

}  // namespace detail

// Eigenvalues of the symmetric circulant matrix with the given first row.
inline std::vector<double> circulant_eigenvalues(std::span<const double> first_row,
                                                 const detail::ForwardPlan& plan) {
  const std::size_t len = first_row.size();
  detail::FftwBuffer row(len), eig(len);
  for (std::size_t j = 0; j < len; ++j) {
    row.data[j][0] = first_row[j];
    row.data[j][1] = 0.0;
  }
  plan.execute(row.data, eig.data);
  std::vector<double> out(len);
  for (std::size_t k = 0; k < len; ++k) out[k] = eig.data[k][0];
  return out;
}

inline std::vector<double> circulant_eigenvalues(std::span<const double> first_row) {
  return circulant_eigenvalues(first_row, detail::ForwardPlan(first_row.size()));
}

// sqrt(lambda_k / len), clamping negatives within tolerance of the largest
// eigenvalue to zero and rejecting anything more negative.
inline std::vector<double> embedding_scales(std::span<const double> eigenvalues) {
  const std::size_t len = eigenvalues.size();
  double max_eig = 0.0;
  for (double v : eigenvalues) max_eig = std::max(max_eig, v);
  std::vector<double> scale(len);
  for (std::size_t k = 0; k < len; ++k) {
    double lambda = eigenvalues[k];
    if (lambda < 0.0) {
      if (lambda < -embedding_negative_tolerance * max_eig)
        throw NumericalError("circulant embedding has negative eigenvalue " +
                             std::to_string(lambda) + " at index " + std::to_string(k) +
                             "; fall back to the Cholesky generator");
      lambda = 0.0;
    }
    scale[k] = std::sqrt(lambda / static_cast<double>(len));
  }
  return scale;
}

class DaviesHarteFbm {
 public:
  DaviesHarteFbm(HurstParam h, const GridSpec& grid) : h_(h), grid_(grid) {
    const std::size_t n = grid.steps();
    const std::size_t len = 2 * n;
    plan_ = std::make_shared<const detail::ForwardPlan>(len);

    // First row of the circulant: g0..g(n-1), g(n), g(n-1)..g1.
    std::vector<double> row(len);
    for (std::size_t j = 0; j <= n; ++j) row[j] = fgn_autocovariance(h, grid.dt(), j);
    for (std::size_t j = n + 1; j < len; ++j) row[j] = row[len - j];
    scale_ = embedding_scales(circulant_eigenvalues(row, *plan_));
  }

  // Real part of FFT(scale_k * (xi_k + i eta_k)) has the circulant covariance;
  // its first n entries are the increments.
  NoisePath sample(std::uint64_t seed) const {
    const std::size_t n = grid_.steps();
    const std::size_t len = 2 * n;
    GaussianStream gauss(seed);
    detail::FftwBuffer in(len), out(len);
    for (std::size_t k = 0; k < len; ++k) {
      in.data[k][0] = scale_[k] * gauss.normal();
      in.data[k][1] = scale_[k] * gauss.normal();
    }
    plan_->execute(in.data, out.data);
    std::vector<double> inc(n);
    for (std::size_t i = 0; i < n; ++i) inc[i] = out.data[i][0];
    return NoisePath{grid_, std::move(inc), NoiseKind::fractional, h_.value(), seed};
  }

  const GridSpec& grid() const noexcept { return grid_; }

 private:
  HurstParam h_;
  GridSpec grid_;
  std::shared_ptr<const detail::ForwardPlan> plan_;
  std::vector<double> scale_;
};

inline NoisePath sample_fbm_cholesky(HurstParam h, const GridSpec& grid, std::uint64_t seed) {
  return CholeskyFbm(h, grid).sample(seed);
}

inline NoisePath sample_fbm_davies_harte(HurstParam h, const GridSpec& grid,
                                         std::uint64_t seed) {
  return DaviesHarteFbm(h, grid).sample(seed);
}

//===========================================================================//
// FbmSampler: generator selection by size                                   //
//===========================================================================//
enum class FbmMethod { automatic, cholesky, davies_harte };

// Grids up to this size use Cholesky under FbmMethod::automatic.
inline constexpr std::size_t automatic_cholesky_limit = 256;

class FbmSampler {
 public:
  FbmSampler(HurstParam h, const GridSpec& grid, FbmMethod method = FbmMethod::automatic)
      : impl_(make(h, grid, method)) {}

  NoisePath sample(std::uint64_t seed) const {
    return std::visit([seed](const auto& g) { return g.sample(seed); }, impl_);
  }
  bool uses_cholesky() const noexcept { return std::holds_alternative<CholeskyFbm>(impl_); }

 private:
  using Impl = std::variant<CholeskyFbm, DaviesHarteFbm>;

  static Impl make(HurstParam h, const GridSpec& grid, FbmMethod method) {
    switch (method) {
      case FbmMethod::cholesky:
        return CholeskyFbm(h, grid);
      case FbmMethod::davies_harte:
        return DaviesHarteFbm(h, grid);
      case FbmMethod::automatic:
        break;
    }
    if (grid.steps() <= automatic_cholesky_limit) return CholeskyFbm(h, grid);
    try {
      return DaviesHarteFbm(h, grid);
    } catch (const NumericalError&) {
      if (grid.steps() > cholesky_size_cap) throw;
      return CholeskyFbm(h, grid);
    }
  }

  Impl impl_;
};

}  // namespace mfcir
