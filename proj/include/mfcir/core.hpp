#pragma once
// Shared value types and error classes for the mixed fractional CIR toolkit.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfcir {

//===========================================================================//
// Errors                                                                    //
//===========================================================================//
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

// Rejected configuration (bad parameter value, divisibility, size cap, ...).
struct ConfigError : Error {
  using Error::Error;
};

// A generator could not produce a valid sample (factorization or embedding).
struct NumericalError : Error {
  using Error::Error;
};

struct CholeskyError : NumericalError {
  CholeskyError(std::size_t pivot, double value)
      : NumericalError("covariance matrix not positive definite at pivot " +
                       std::to_string(pivot) + " (value " +
                       std::to_string(value) + ")"),
        pivot_index(pivot) {}
  std::size_t pivot_index;
};

//===========================================================================//
// HurstParam                                                                //
//===========================================================================//
class HurstParam {
 public:
  explicit HurstParam(double h) : h_(h) {
    if (!(h > 0.0 && h < 1.0))
      throw DomainError("Hurst parameter must lie in (0,1), got " +
                        std::to_string(h));
  }
  // The model pipeline only accepts H > 1/2.
  static HurstParam for_model(double h) {
    if (!(h > 0.5 && h < 1.0))
      throw ConfigError("hurst: model requires 1/2 < H < 1, got " +
                        std::to_string(h));
    return HurstParam(h);
  }
  double value() const noexcept { return h_; }
  friend bool operator==(HurstParam, HurstParam) = default;

 private:
  double h_;
};

//===========================================================================//
// GridSpec: uniform partition t_k = k T / n of [0,T].                       //
//===========================================================================//
class GridSpec {
 public:
  GridSpec(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw ConfigError("T: horizon must be positive and finite");
    if (steps == 0) throw ConfigError("n: step count must be positive");
  }

  double horizon() const noexcept { return horizon_; }
  std::size_t steps() const noexcept { return steps_; }
  double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }
  // Exact at the endpoint: time(steps()) == horizon().
  double time(std::size_t k) const noexcept {
    return k == steps_ ? horizon_
                       : horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
  }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  double horizon_;
  std::size_t steps_;
};

//===========================================================================//
// NoisePath: increments of one driver realization on a grid.                //
//===========================================================================//
enum class NoiseKind { brownian, fractional, mixed };

struct NoisePath {
  GridSpec grid;
  std::vector<double> increments;
  NoiseKind kind = NoiseKind::brownian;
  double hurst = 0.5;  // meaningful for fractional / mixed
  std::uint64_t seed = 0;

  // Path values M_{t_0} = 0, M_{t_1}, ..., M_{t_n}.
  std::vector<double> cumulative() const {
    std::vector<double> path(increments.size() + 1, 0.0);
    for (std::size_t i = 0; i < increments.size(); ++i)
      path[i + 1] = path[i] + increments[i];
    return path;
  }
};

}  // namespace mfcir
