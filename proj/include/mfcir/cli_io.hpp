#pragma once
// Command-line configuration and CSV / JSON-lines emission.
//
// Exit codes:
//   0  success
//   2  configuration error (bad value, unknown key, Feller refusal, ...)
//   3  output file could not be written
//   4  numerical failure (fBm generator could not factor / embed)

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cir_scheme.hpp"
#include "core.hpp"
#include "experiments.hpp"
#include "mixed_path.hpp"
#include "parallel.hpp"

namespace mfcir::cli {

enum class Command { simulate, convergence, positivity, bracket, mcstats };
enum class Format { csv, json_lines };

enum ExitCode : int { ok = 0, config_error = 2, io_error = 3, numerical_error = 4 };

struct RunConfig {
  Command command = Command::simulate;
  CirParams params{1.0, 1.0, 1.0, 1.0};
  MixedSpec mixed{};
  GridSpec grid{1.0, 1024};
  std::size_t n_paths = 10;
  std::uint64_t seed = 42;
  std::string output_path;  // empty: standard output
  Format format = Format::csv;
  // convergence
  std::vector<std::size_t> n_list{64, 128, 256, 512, 1024};
  std::size_t n_ref = 16384;
  std::size_t n_seeds = 50;
  ErrorNorm norm = ErrorNorm::interpolated;
  // bracket
  std::vector<std::size_t> refinements{1, 4, 16, 64, 256};
  // mcstats; defaults to T
  std::optional<double> t_eval;
  FbmMethod fbm_method = FbmMethod::automatic;
  std::vector<std::string> warnings;
};

//===========================================================================//
// Number formatting                                                         //
//===========================================================================//
// 17 significant digits, locale independent; round-trips every double.
inline std::string format_double(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

//===========================================================================//
// Parsing                                                                   //
//===========================================================================//
namespace detail {

struct RawOptions {
  double k = 1.0, theta = 1.0, sigma = 1.0, r0 = 1.0, hurst = 0.75;
  double weight_bm = 1.0, weight_fbm = 1.0;
  double horizon = 1.0;
  std::size_t n = 1024, paths = 10;
  std::uint64_t seed = 42;
  std::string out, format = "csv", preset, norm = "interpolated", fbm = "auto";
  std::vector<std::size_t> n_list{64, 128, 256, 512, 1024};
  std::size_t n_ref = 16384, seeds = 50;
  std::vector<std::size_t> refinements{1, 4, 16, 64, 256};
  double t_eval = 0.0;
};

inline void build_app(CLI::App& app, RawOptions& o) {
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value file; keys are the long flag names");
  app.allow_config_extras(CLI::config_extras_mode::error);

  app.add_option("--k", o.k, "mean-reversion speed")->capture_default_str();
  app.add_option("--theta", o.theta, "long-run level")->capture_default_str();
  app.add_option("--sigma", o.sigma, "volatility")->capture_default_str();
  app.add_option("--r0", o.r0, "initial rate")->capture_default_str();
  app.add_option("--hurst", o.hurst, "Hurst index, 1/2 < H < 1")->capture_default_str();
  app.add_option("--weight-bm", o.weight_bm, "weight of B in M")->capture_default_str();
  app.add_option("--weight-fbm", o.weight_fbm, "weight of B^H in M")->capture_default_str();
  app.add_option("--T", o.horizon, "time horizon")->capture_default_str();
  app.add_option("--n", o.n, "number of time steps")->capture_default_str();
  app.add_option("--paths", o.paths, "number of sample paths")->capture_default_str();
  app.add_option("--seed", o.seed, "master seed")->capture_default_str();
  app.add_option("--out", o.out, "output file (default: standard output)");
  app.add_option("--format", o.format, "csv or json-lines")->capture_default_str();
  app.add_option("--preset", o.preset, "figure1: k=theta=sigma=1, H=0.75, r0=1, T=10, n=4096, "
                                       "paths=50 (parameters assumed, not from the source)");
  app.add_option("--fbm", o.fbm, "fBm generator: auto, cholesky or davies-harte")
      ->capture_default_str();

  app.add_subcommand("simulate", "write trajectories path_id,t,z,r");
  auto* conv = app.add_subcommand("convergence", "self-convergence order study");
  conv->add_option("--n-list", o.n_list, "coarse step counts")->delimiter(',');
  conv->add_option("--n-ref", o.n_ref, "reference step count")->capture_default_str();
  conv->add_option("--seeds", o.seeds, "number of seeds")->capture_default_str();
  conv->add_option("--norm", o.norm, "interpolated or grid")->capture_default_str();
  app.add_subcommand("positivity", "minimum of z and r over an ensemble");
  auto* br = app.add_subcommand("bracket", "quadratic variation and bracket estimates");
  br->add_option("--refinements", o.refinements, "inner sub-steps per outer interval")
      ->delimiter(',');
  auto* mc = app.add_subcommand("mcstats", "Monte Carlo mean of r");
  mc->add_option("--t-eval", o.t_eval, "evaluation time (default T)");
}

inline bool given(const CLI::App& app, const std::string& name) {
  return app.get_option(name)->count() > 0;
}

template <typename Fn>
auto field(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    const std::string msg = e.what();
    // Messages from the value types already start with the field name.
    if (msg.rfind(name, 0) == 0) throw ConfigError(msg);
    throw ConfigError(std::string(name) + ": " + msg);
  }
}

}  // namespace detail

// Parses and validates; throws ConfigError (or CLI::ParseError for syntax and
// help requests) on failure.
inline RunConfig parse_config(int argc, const char* const* argv) {
  CLI::App app{"Mixed fractional CIR simulator", "mfcir"};
  detail::RawOptions o;
  detail::build_app(app, o);
  app.parse(argc, argv);

  if (!o.preset.empty()) {
    if (o.preset != "figure1") throw ConfigError("preset: unknown preset '" + o.preset + "'");
    auto def = [&](const char* name, auto& slot, auto value) {
      if (!detail::given(app, name)) slot = value;
    };
    def("--k", o.k, 1.0);
    def("--theta", o.theta, 1.0);
    def("--sigma", o.sigma, 1.0);
    def("--hurst", o.hurst, 0.75);
    def("--r0", o.r0, 1.0);
    def("--T", o.horizon, 10.0);
    def("--n", o.n, std::size_t{4096});
    def("--paths", o.paths, std::size_t{50});
  }

  RunConfig cfg;
  const std::string sub = app.get_subcommands().front()->get_name();
  if (sub == "simulate") cfg.command = Command::simulate;
  else if (sub == "convergence") cfg.command = Command::convergence;
  else if (sub == "positivity") cfg.command = Command::positivity;
  else if (sub == "bracket") cfg.command = Command::bracket;
  else cfg.command = Command::mcstats;

  cfg.params = detail::field("k", [&] { return CirParams(o.k, o.theta, o.sigma, o.r0); });
  cfg.mixed.hurst = detail::field("hurst", [&] { return HurstParam::for_model(o.hurst); });
  cfg.mixed.weight_bm = o.weight_bm;
  cfg.mixed.weight_fbm = o.weight_fbm;
  cfg.mixed.validate();
  cfg.grid = detail::field("n", [&] {
    if (!(o.horizon > 0.0) || !std::isfinite(o.horizon))
      throw ConfigError("T: horizon must be positive and finite");
    return GridSpec(o.horizon, o.n);
  });
  if (o.paths == 0) throw ConfigError("paths: must be positive");
  cfg.n_paths = o.paths;
  cfg.seed = o.seed;
  cfg.output_path = o.out;

  if (o.format == "csv") cfg.format = Format::csv;
  else if (o.format == "json-lines" || o.format == "jsonl") cfg.format = Format::json_lines;
  else throw ConfigError("format: expected csv or json-lines, got '" + o.format + "'");

  if (o.fbm == "auto") cfg.fbm_method = FbmMethod::automatic;
  else if (o.fbm == "cholesky") cfg.fbm_method = FbmMethod::cholesky;
  else if (o.fbm == "davies-harte") cfg.fbm_method = FbmMethod::davies_harte;
  else throw ConfigError("fbm: expected auto, cholesky or davies-harte, got '" + o.fbm + "'");

  if (o.norm == "interpolated") cfg.norm = ErrorNorm::interpolated;
  else if (o.norm == "grid") cfg.norm = ErrorNorm::grid_points;
  else throw ConfigError("norm: expected interpolated or grid, got '" + o.norm + "'");

  cfg.n_list = o.n_list;
  cfg.n_ref = o.n_ref;
  if (o.seeds == 0) throw ConfigError("seeds: must be positive");
  cfg.n_seeds = o.seeds;
  if (cfg.command == Command::convergence) {
    if (cfg.n_list.empty()) throw ConfigError("n-list: must not be empty");
    std::size_t n_max = 0;
    for (std::size_t n : cfg.n_list) {
      if (n == 0 || cfg.n_ref % n != 0)
        throw ConfigError("n-list: " + std::to_string(n) + " does not divide n-ref " +
                          std::to_string(cfg.n_ref));
      n_max = std::max(n_max, n);
    }
    if (cfg.n_ref < 8 * n_max) throw ConfigError("n-ref: must be at least 8 x max(n-list)");
  }

  cfg.refinements = o.refinements;
  if (cfg.command == Command::bracket)
    for (std::size_t r : cfg.refinements)
      if (r == 0 || cfg.grid.steps() % r != 0)
        throw ConfigError("refinements: " + std::to_string(r) + " does not divide n " +
                          std::to_string(cfg.grid.steps()));

  if (detail::given(*app.get_subcommand("mcstats"), "--t-eval")) {
    if (!(o.t_eval > 0.0 && o.t_eval <= cfg.grid.horizon()))
      throw ConfigError("t-eval: must lie in (0, T]");
    cfg.t_eval = o.t_eval;
  }

  if (!cfg.params.feller_ok())
    cfg.warnings.push_back("warning: Feller condition 2 k theta > sigma^2 fails (2 k theta = " +
                           format_double(2.0 * cfg.params.k() * cfg.params.theta()) +
                           ", sigma^2 = " + format_double(cfg.params.sigma() * cfg.params.sigma()) +
                           "); positivity of the model is not guaranteed");
  if (o.preset == "figure1")
    cfg.warnings.push_back("note: preset figure1 parameters assumed, not from the source");
  return cfg;
}

//===========================================================================//
// Emission                                                                  //
//===========================================================================//
inline void emit_trajectories(std::ostream& os, std::span<const Trajectory> paths, Format format) {
  if (format == Format::csv) os << "path_id,t,z,r\n";
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const Trajectory& tr = paths[p];
    for (std::size_t i = 0; i < tr.z_values.size(); ++i) {
      const double t = tr.grid.time(i);
      if (format == Format::csv) {
        os << p << ',' << format_double(t) << ',' << format_double(tr.z_values[i]) << ','
           << format_double(tr.r_values[i]) << '\n';
      } else {
        os << nlohmann::json{{"path_id", p}, {"t", t}, {"z", tr.z_values[i]}, {"r", tr.r_values[i]}}
                  .dump()
           << '\n';
      }
    }
  }
}

inline void emit_report(std::ostream& os, const ConvergenceReport& rep, Format format) {
  if (format == Format::csv) os << "n,median_sup_error,q25,q75\n";
  for (std::size_t j = 0; j < rep.n_list.size(); ++j) {
    if (format == Format::csv) {
      os << rep.n_list[j] << ',' << format_double(rep.sup_errors[j]) << ','
         << format_double(rep.q25[j]) << ',' << format_double(rep.q75[j]) << '\n';
    } else {
      os << nlohmann::json{{"n", rep.n_list[j]},
                           {"median_sup_error", rep.sup_errors[j]},
                           {"q25", rep.q25[j]},
                           {"q75", rep.q75[j]}}
                .dump()
         << '\n';
    }
  }
  if (format == Format::csv)
    os << "fitted_order=" << format_double(rep.fitted_order) << ",r2=" << format_double(rep.fit_r2)
       << '\n';
  else
    os << nlohmann::json{{"fitted_order", rep.fitted_order}, {"r2", rep.fit_r2}}.dump() << '\n';
}

inline void emit_report(std::ostream& os, const PositivityReport& rep, Format format) {
  if (format == Format::csv) {
    os << "n_paths,min_z,min_r,feller_ok\n"
       << rep.n_paths << ',' << format_double(rep.min_z) << ',' << format_double(rep.min_r) << ','
       << (rep.feller_ok ? "true" : "false") << '\n';
  } else {
    os << nlohmann::json{{"n_paths", rep.n_paths},
                         {"min_z", rep.min_z},
                         {"min_r", rep.min_r},
                         {"feller_ok", rep.feller_ok}}
              .dump()
       << '\n';
  }
}

inline void emit_report(std::ostream& os, const McStats& mc, Format format) {
  if (format == Format::csv) {
    os << "t_eval,sample_mean,sample_se,n_paths,closed_form_mean\n"
       << format_double(mc.t_eval) << ',' << format_double(mc.sample_mean) << ','
       << format_double(mc.sample_se) << ',' << mc.n_paths << ','
       << (mc.closed_form_mean ? format_double(*mc.closed_form_mean) : "") << '\n';
  } else {
    nlohmann::json j{{"t_eval", mc.t_eval},
                     {"sample_mean", mc.sample_mean},
                     {"sample_se", mc.sample_se},
                     {"n_paths", mc.n_paths}};
    j["closed_form_mean"] = mc.closed_form_mean ? nlohmann::json(*mc.closed_form_mean) : nullptr;
    os << j.dump() << '\n';
  }
}

inline void emit_report(std::ostream& os, std::span<const BracketRow> rows, Format format) {
  if (format == Format::csv) os << "n,refinement,qv,bracket_value\n";
  for (const auto& row : rows) {
    if (format == Format::csv)
      os << row.n << ',' << row.refinement << ',' << format_double(row.qv) << ','
         << format_double(row.bracket_value) << '\n';
    else
      os << nlohmann::json{{"n", row.n},
                           {"refinement", row.refinement},
                           {"qv", row.qv},
                           {"bracket_value", row.bracket_value}}
                .dump()
         << '\n';
  }
}

inline void emit_report(std::ostream& os, const BracketEstimate& est, Format format) {
  const BracketRow row{est.grid.steps(), est.refinement, est.qv_sum, est.bracket_value};
  emit_report(os, std::span<const BracketRow>(&row, 1), format);
}

//===========================================================================//
// Dispatch                                                                  //
//===========================================================================//
inline std::vector<Trajectory> simulate_ensemble(const RunConfig& cfg) {
  const MixedPathBuilder builder(cfg.mixed, cfg.grid, cfg.fbm_method);
  std::vector<std::optional<Trajectory>> slots(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    slots[i] = simulate_z(cfg.params, builder.build(derive_seed(cfg.seed, i)));
  });
  std::vector<Trajectory> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// Runs the configured command, writing the result to `os` and diagnostics to `log`.
inline void execute(const RunConfig& cfg, std::ostream& os, std::ostream& log) {
  switch (cfg.command) {
    case Command::simulate: {
      const auto paths = simulate_ensemble(cfg);
      emit_trajectories(os, paths, cfg.format);
      break;
    }
    case Command::convergence: {
      const auto seeds = derive_seeds(cfg.seed, cfg.n_seeds);
      const auto rep = run_convergence(cfg.params, cfg.mixed, cfg.grid.horizon(), cfg.n_list,
                                       cfg.n_ref, seeds, cfg.norm, cfg.fbm_method);
      if (rep.excluded_zero_errors > 0)
        log << "note: " << rep.excluded_zero_errors << " zero error(s) excluded from the fit\n";
      log << "grid-point order " << format_double(rep.node_fitted_order) << ", uniform-bound violations "
          << rep.bound_violations << '\n';
      emit_report(os, rep, cfg.format);
      break;
    }
    case Command::positivity:
      emit_report(os, run_positivity(cfg.params, cfg.mixed, cfg.grid, cfg.n_paths, cfg.seed,
                                     cfg.fbm_method),
                  cfg.format);
      break;
    case Command::bracket: {
      const auto rows =
          run_bracket(cfg.mixed, cfg.grid, cfg.refinements, cfg.n_paths, cfg.seed, cfg.fbm_method);
      emit_report(os, std::span<const BracketRow>(rows), cfg.format);
      break;
    }
    case Command::mcstats:
      emit_report(os, run_mc_stats(cfg.params, cfg.mixed, cfg.grid,
                                   cfg.t_eval.value_or(cfg.grid.horizon()), cfg.n_paths, cfg.seed,
                                   cfg.fbm_method),
                  cfg.format);
      break;
  }
}

// Full CLI behaviour, returning the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  RunConfig cfg;
  try {
    cfg = parse_config(argc, argv);
  } catch (const CLI::CallForHelp&) {
    CLI::App app{"Mixed fractional CIR simulator", "mfcir"};
    detail::RawOptions o;
    detail::build_app(app, o);
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  }
  for (const auto& w : cfg.warnings) err << w << '\n';

  std::ostringstream buffer;
  try {
    execute(cfg, buffer, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return numerical_error;
  }

  if (cfg.output_path.empty()) {
    out << buffer.str();
    out.flush();
    return out ? ok : io_error;
  }
  std::ofstream file(cfg.output_path, std::ios::binary | std::ios::trunc);
  if (!file) {
    err << "error: cannot open '" << cfg.output_path << "' for writing\n";
    return io_error;
  }
  file << buffer.str();
  file.close();
  if (!file) {
    err << "error: failed writing '" << cfg.output_path << "'\n";
    return io_error;
  }
  return ok;
}

}  // namespace mfcir::cli
