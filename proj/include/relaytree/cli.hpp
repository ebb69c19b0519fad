#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relaytree/analysis.hpp"
#include "relaytree/bounds.hpp"
#include "relaytree/csv.hpp"
#include "relaytree/error.hpp"
#include "relaytree/geometry.hpp"
#include "relaytree/monte_carlo.hpp"
#include "relaytree/oracle.hpp"
#include "relaytree/schedule.hpp"
#include "relaytree/trajectory.hpp"

namespace relaytree::cli {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kOutputDirEnv = "RELAYTREE_OUTPUT_DIR";

enum ExitCode : int { kOk = 0, kConfigError = 2, kDomainError = 3, kInternalError = 4 };

struct ExperimentConfig {
  std::string subcommand;
  double alpha0 = 0.1;
  double beta0 = 0.2;
  std::string schedule_text = "none";
  std::optional<std::size_t> height;
  std::optional<std::uint64_t> sensors;
  double prior0 = 0.5;
  bool prior0_given = false;
  std::string out_path;
  std::string format;  // csv or kv; empty picks the subcommand's default

  std::optional<double> c_override;
  std::uint64_t trials = 100'000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::size_t oracle_max_height = 5;
  std::vector<double> region_qs{0.1, 0.01};
  double region_step = 0.001;
  double region_alpha_max = 0.5;
  bool ratio_grid = false;
  std::vector<double> ratio_alphas{0.01, 0.05, 0.1, 0.2};
  std::size_t ratio_points = 50;
  double scaling_p0 = 0.1;
  std::size_t scaling_min_height = 1;
  std::size_t scaling_max_height = 20;
  std::size_t window_lo = 8;
  std::size_t window_hi = 20;
  std::optional<double> epsilon;
  std::optional<double> l0;
  std::size_t decay_horizon = 24;
  double decay_threshold = 0.05;
};

namespace detail {

inline std::size_t resolve_height(const ExperimentConfig& cfg) {
  if (cfg.height && cfg.sensors) throw InvalidArgument("give either --height or --sensors, not both");
  if (cfg.sensors) return relaytree::detail::tree_height(*cfg.sensors);
  if (cfg.height) return *cfg.height;
  throw InvalidArgument("--height or --sensors is required");
}

inline void check_common(const ExperimentConfig& cfg) {
  relaytree::detail::require_probability(cfg.alpha0, "--alpha0");
  relaytree::detail::require_probability(cfg.beta0, "--beta0");
  if (!(cfg.alpha0 + cfg.beta0 < 1.0)) throw InvalidArgument("--alpha0 + --beta0 must be below 1");
  if (!(cfg.prior0 > 0.0 && cfg.prior0 < 1.0)) throw InvalidArgument("--prior0 must lie in (0, 1)");
  if (!cfg.format.empty() && cfg.format != "csv" && cfg.format != "kv") {
    throw InvalidArgument("--format must be csv or kv");
  }
}

inline std::string header_line(const std::string& subcommand) {
  return std::string("# relaytree ") + kVersion + " " + subcommand + "\n";
}

inline std::string emit_evolve(const ExperimentConfig& cfg, const FailureSchedule& schedule) {
  const auto height = resolve_height(cfg);
  const auto traj = evolve<long double>(cfg.alpha0, cfg.beta0, schedule, height);
  csv::Table table{"k", "alpha", "beta", "q", "L", "halfL", "starvation", "region"};
  for (const auto& lv : traj.levels) {
    table.row({lv.k, lv.state.alpha, lv.state.beta, lv.state.q, lv.total, lv.half_total, lv.starvation,
               to_string(lv.region)});
  }
  return table.str();
}

inline std::string emit_bounds(const ExperimentConfig& cfg, const FailureSchedule& schedule) {
  const auto height = resolve_height(cfg);
  const std::uint64_t n = std::uint64_t{1} << height;
  const auto traj = evolve<long double>(cfg.alpha0, cfg.beta0, schedule, height);
  std::optional<long double> c;
  if (cfg.c_override) c = static_cast<long double>(*cfg.c_override);
  const auto r = make_bounds_report<long double>(traj, n, cfg.prior0, c);
  const auto inside = [](long double v, long double lo, bool vacuous, long double hi) {
    return v <= hi && (vacuous || v >= lo);
  };
  const bool in_equal = inside(r.measured_bits, r.lower_bits, r.lower_vacuous, r.upper_bits);
  const bool in_weighted =
      inside(r.measured_weighted_bits, r.weighted_lower_bits, r.weighted_lower_vacuous, r.weighted_upper_bits);
  if (cfg.format == "csv") {
    csv::Table table{"n_sensors", "height", "parity", "L0", "c_constant", "lower_bits", "upper_bits",
                     "lower_vacuous", "parity_free_upper_bits", "prior0", "prior1", "weighted_lower_bits",
                     "weighted_upper_bits", "weighted_lower_vacuous", "measured_bits", "measured_weighted_bits",
                     "inside", "inside_weighted"};
    table.row({r.n_sensors, r.height, to_string(r.parity), r.l0, r.c_constant, r.lower_bits, r.upper_bits,
               r.lower_vacuous, r.parity_free_upper_bits, r.prior0, r.prior1, r.weighted_lower_bits, r.weighted_upper_bits,
               r.weighted_lower_vacuous, r.measured_bits, r.measured_weighted_bits, in_equal, in_weighted});
    return table.str();
  }
  csv::Record rec;
  rec.add("n_sensors", r.n_sensors)
      .add("height", r.height)
      .add("parity", to_string(r.parity))
      .add("L0", r.l0)
      .add("c_constant", r.c_constant)
      .add("lower_bits", r.lower_bits)
      .add("upper_bits", r.upper_bits)
      .add("lower_vacuous", r.lower_vacuous)
      .add("parity_free_upper_bits", r.parity_free_upper_bits)
      .add("prior0", r.prior0)
      .add("prior1", r.prior1)
      .add("weighted_lower_bits", r.weighted_lower_bits)
      .add("weighted_upper_bits", r.weighted_upper_bits)
      .add("weighted_lower_vacuous", r.weighted_lower_vacuous)
      .add("measured_bits", r.measured_bits)
      .add("measured_weighted_bits", r.measured_weighted_bits)
      .add("inside", in_equal)
      .add("inside_weighted", in_weighted);
  return rec.str();
}

inline std::string emit_simulate(const ExperimentConfig& cfg, const FailureSchedule& schedule) {
  const auto height = resolve_height(cfg);
  SimConfig sc;
  sc.alpha0 = cfg.alpha0;
  sc.beta0 = cfg.beta0;
  sc.height = height;
  sc.trials = cfg.trials;
  sc.seed = cfg.seed;
  sc.prior0 = cfg.prior0;
  sc.threads = cfg.threads;
  const auto traj = evolve<long double>(cfg.alpha0, cfg.beta0, schedule, height);
  const auto est = monte_carlo(sc, schedule);
  const auto& root = traj.root();
  // Zero observed events give a zero empirical standard error; use the
  // binomial one at the reference value instead.
  const auto z = [](double estimate, long double reference, double se, std::uint64_t n) {
    const double ref = static_cast<double>(reference);
    const double scale = se > 0.0 ? se : std::sqrt(ref * (1.0 - ref) / static_cast<double>(n));
    if (scale > 0.0) return (estimate - ref) / scale;
    return estimate == ref ? 0.0 : HUGE_VAL;
  };
  const double z1 = z(est.est_type1, root.state.alpha, est.se_type1, est.rooted_trials);
  const double z2 = z(est.est_type2, root.state.beta, est.se_type2, est.rooted_trials);
  const double zs = z(est.est_starvation, root.starvation, est.se_starvation, est.trials);
  if (cfg.format == "kv") {
    csv::Record rec;
    rec.add("trials", est.trials)
        .add("seed", est.seed)
        .add("height", height)
        .add("rooted_trials", est.rooted_trials)
        .add("est_type1", est.est_type1)
        .add("est_type2", est.est_type2)
        .add("est_starvation", est.est_starvation)
        .add("se_type1", est.se_type1)
        .add("se_type2", est.se_type2)
        .add("se_starvation", est.se_starvation)
        .add("half_width_95", est.half_width_95)
        .add("est_unconditional", est.est_unconditional)
        .add("rec_alpha", root.state.alpha)
        .add("rec_beta", root.state.beta)
        .add("rec_starvation", root.starvation)
        .add("z_type1", z1)
        .add("z_type2", z2)
        .add("z_starvation", zs);
    for (std::size_t k = 0; k < est.silence.size(); ++k) {
      rec.add("silence_" + std::to_string(k), est.silence[k]).add("rec_q_" + std::to_string(k), traj[k].state.q);
    }
    return rec.str();
  }
  csv::Table table{"trials", "seed", "height", "rooted_trials", "est_type1", "est_type2", "est_starvation",
                   "se_type1", "se_type2", "se_starvation", "half_width_95", "est_unconditional", "rec_alpha",
                   "rec_beta", "rec_starvation", "z_type1", "z_type2", "z_starvation"};
  table.row({est.trials, est.seed, height, est.rooted_trials, est.est_type1, est.est_type2, est.est_starvation,
             est.se_type1, est.se_type2, est.se_starvation, est.half_width_95, est.est_unconditional,
             root.state.alpha, root.state.beta, root.starvation, z1, z2, zs});
  return table.str();
}

inline std::string emit_oracle(const ExperimentConfig& cfg, const FailureSchedule& schedule) {
  if (cfg.oracle_max_height < 1 || cfg.oracle_max_height > kOracleMaxHeight) {
    throw InvalidArgument("--max-height must lie in [1, " + std::to_string(kOracleMaxHeight) + "]");
  }
  const auto dist = exact_pair_distribution<long double>(cfg.alpha0, cfg.beta0, schedule, cfg.oracle_max_height);
  const auto traj = evolve<long double>(cfg.alpha0, cfg.beta0, schedule, cfg.oracle_max_height);
  csv::Table table{"height", "atoms", "data_prob", "mean_alpha", "mean_beta", "rec_alpha", "rec_beta",
                   "resid_alpha", "resid_beta", "oracle_q", "rec_q", "resid_q", "rec_data_prob", "resid_data_prob"};
  for (const auto& lv : dist.levels) {
    if (lv.k == 0) continue;
    const auto& ref = traj[lv.k];
    table.row({lv.k, lv.atom_count, lv.data_prob, lv.mean_type1, lv.mean_type2, ref.state.alpha, ref.state.beta,
               lv.mean_type1 - ref.state.alpha, lv.mean_type2 - ref.state.beta, lv.silence, ref.state.q,
               lv.silence - ref.state.q, 1.0L - ref.starvation, lv.data_prob - (1.0L - ref.starvation)});
  }
  return table.str();
}

inline std::string emit_regions(const ExperimentConfig& cfg) {
  std::vector<long double> qs(cfg.region_qs.begin(), cfg.region_qs.end());
  const auto grid = boundary_grid(qs, cfg.region_step, cfg.region_alpha_max);
  csv::Table table{"q", "alpha", "b_upper", "ru_upper"};
  for (const auto& p : grid) table.row({p.q, p.alpha, p.b_upper, p.ru_upper});
  return table.str();
}

inline std::string emit_ratios(const ExperimentConfig& cfg, const FailureSchedule& schedule) {
  if (cfg.ratio_grid) {
    std::vector<long double> alphas(cfg.ratio_alphas.begin(), cfg.ratio_alphas.end());
    const auto grid = ratio_grid(alphas, cfg.c_override.value_or(1.0), cfg.ratio_points);
    csv::Table table{"alpha", "beta", "q", "region", "two_step", "bound"};
    for (const auto& p : grid) table.row({p.alpha, p.beta, p.q, to_string(p.region), p.two_step, p.bound});
    return table.str();
  }
  const auto height = resolve_height(cfg);
  const auto traj = evolve<long double>(cfg.alpha0, cfg.beta0, schedule, height);
  const long double c = cfg.c_override ? static_cast<long double>(*cfg.c_override) : estimate_c(traj);
  const auto report = check_step_ratios(traj, c);
  csv::Table table{"k", "L", "one_step", "shrink", "two_step", "two_step_upper", "region", "two_step_applicable",
                   "ok"};
  for (const auto& e : report.entries) {
    const auto& lv = traj[e.k];
    const bool ok = e.one_step_ok && e.shrink_ok && e.two_step_ok && e.smaller_q_ok;
    table.row({e.k, lv.total, e.one_step, e.shrink, e.two_step ? csv::Cell(*e.two_step) : csv::Cell(""),
               report.two_step_upper, to_string(lv.region), e.two_step_applicable, ok});
  }
  return table.str();
}

inline std::string emit_scaling(const ExperimentConfig& cfg) {
  const long double prior0 = cfg.prior0_given ? cfg.prior0 : 0.4;
  const std::vector<std::pair<std::string, FailureSchedule>> profiles = {
      {"none", FailureSchedule::none()},
      {"quadratic", FailureSchedule::quadratic(cfg.scaling_p0)},
      {"constant", FailureSchedule::constant(cfg.scaling_p0)},
  };
  csv::Table table{"profile", "log2_n", "p_hat", "log2_log2_inv_p_hat", "slope"};
  for (const auto& [name, schedule] : profiles) {
    const auto curve = scaling_curve(name, cfg.alpha0, cfg.beta0, schedule, cfg.scaling_min_height,
                                     cfg.scaling_max_height, prior0, cfg.window_lo, cfg.window_hi);
    for (const auto& pt : curve.points) table.row({curve.profile, pt.height, pt.p_hat, pt.log2_log2_inv, curve.slope});
  }
  return table.str();
}

inline std::string emit_size(const ExperimentConfig& cfg) {
  if (!cfg.epsilon) throw InvalidArgument("--epsilon is required");
  const long double eps = *cfg.epsilon;
  const long double l0 = cfg.l0 ? static_cast<long double>(*cfg.l0) : static_cast<long double>(cfg.alpha0 + cfg.beta0);
  const long double c = cfg.c_override.value_or(0.0);
  const auto n = required_sensors(eps, l0, c);
  const long double root = std::log2(1.0L / eps) / (std::log2(1.0L / l0) - std::log2(6.0L * c + 2.0L));
  csv::Record rec;
  rec.add("epsilon", eps)
      .add("L0", l0)
      .add("c_constant", c)
      .add("bound_rhs", root * root)
      .add("n_sensors", n)
      .add("height", relaytree::detail::tree_height(n));
  return rec.str();
}

inline std::string emit_decay(const ExperimentConfig& cfg, const FailureSchedule& schedule) {
  const auto rep = decay_profile(schedule, cfg.decay_horizon, cfg.decay_threshold);
  csv::Record rec;
  rec.add("schedule", schedule.to_string())
      .add("horizon", cfg.decay_horizon)
      .add("threshold", rep.threshold)
      .add("min_r", rep.min_r)
      .add("trend_slope", rep.trend_slope)
      .add("trending_to_zero", rep.trending_to_zero)
      .add("verdict", to_string(rep.verdict))
      .add("note", "finite-horizon surrogate");
  return rec.str();
}

inline std::filesystem::path output_path(const std::string& out) {
  std::filesystem::path p(out);
  if (p.is_relative()) {
    if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) p = std::filesystem::path(dir) / p;
  }
  return p;
}

// Writes through a temporary file so a failure never leaves a partial file.
inline void write_file(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f << body;
    if (!f) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Computes the body for a validated config.
inline std::string render(const ExperimentConfig& cfg) {
  detail::check_common(cfg);
  const auto schedule = parse_schedule(cfg.schedule_text);
  const auto& sub = cfg.subcommand;
  std::string body;
  if (sub == "evolve") body = detail::emit_evolve(cfg, schedule);
  else if (sub == "bounds") body = detail::emit_bounds(cfg, schedule);
  else if (sub == "simulate") body = detail::emit_simulate(cfg, schedule);
  else if (sub == "oracle") body = detail::emit_oracle(cfg, schedule);
  else if (sub == "regions") body = detail::emit_regions(cfg);
  else if (sub == "ratios") body = detail::emit_ratios(cfg, schedule);
  else if (sub == "scaling") body = detail::emit_scaling(cfg);
  else if (sub == "size") body = detail::emit_size(cfg);
  else if (sub == "decay") body = detail::emit_decay(cfg, schedule);
  else throw InvalidArgument("unknown subcommand '" + sub + "'");
  return detail::header_line(sub) + body;
}

/// Full command-line entry point. Returns 0 on success, 2 for configuration
/// errors, 3 for domain errors and 4 for anything unexpected.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  ExperimentConfig cfg;
  CLI::App app{"Detection performance of balanced binary relay trees with node and link failures", "relaytree"};
  app.set_config("--config", "", "key=value file with option values");
  app.require_subcommand(1);
  app.add_option("--alpha0", cfg.alpha0, "sensor Type I error")->capture_default_str();
  app.add_option("--beta0", cfg.beta0, "sensor Type II error")->capture_default_str();
  app.add_option("--schedule", cfg.schedule_text,
                 "failure schedule: none | constant:p=P | quadratic:p0=P | geometric:p0=P,r=R | "
                 "explicit:p0,p1,... | raw:(n,l);(n,l);...")
      ->capture_default_str();
  app.add_option("--height", cfg.height, "tree height log2 N");
  app.add_option("--sensors", cfg.sensors, "number of sensors N (power of two)");
  auto* prior_opt = app.add_option("--prior0", cfg.prior0, "prior P(H0)")->capture_default_str();
  app.add_option("--out", cfg.out_path, std::string("output file (relative paths resolve against $") + kOutputDirEnv + ")");
  app.add_option("--format", cfg.format, "csv or kv");
  app.add_option("--c", cfg.c_override, "override the constant C in q_k <= C L_k");

  auto* evolve_cmd = app.add_subcommand("evolve", "per-level trajectory of (alpha, beta, q)");
  auto* bounds_cmd = app.add_subcommand("bounds", "error-exponent bounds for one tree size");
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo over randomly pruned trees");
  sim_cmd->add_option("--trials", cfg.trials)->capture_default_str();
  sim_cmd->add_option("--seed", cfg.seed)->capture_default_str();
  sim_cmd->add_option("--threads", cfg.threads, "worker threads (0 = all cores)")->capture_default_str();
  auto* oracle_cmd = app.add_subcommand("oracle", "exact distribution vs recursion residuals");
  oracle_cmd->add_option("--max-height", cfg.oracle_max_height)->capture_default_str();
  auto* regions_cmd = app.add_subcommand("regions", "upper boundaries of B and R_U");
  regions_cmd->add_option("--q", cfg.region_qs, "silence probabilities")->delimiter(',')->capture_default_str();
  regions_cmd->add_option("--step", cfg.region_step)->capture_default_str();
  regions_cmd->add_option("--alpha-max", cfg.region_alpha_max)->capture_default_str();
  auto* ratios_cmd = app.add_subcommand("ratios", "step-ratio diagnostics");
  ratios_cmd->add_flag("--grid", cfg.ratio_grid, "sweep R_U for fixed alphas instead of a trajectory");
  ratios_cmd->add_option("--alphas", cfg.ratio_alphas)->delimiter(',')->capture_default_str();
  ratios_cmd->add_option("--points", cfg.ratio_points)->capture_default_str();
  auto* scaling_cmd = app.add_subcommand("scaling", "log2 log2 Phat^-1 against log2 N for three failure profiles");
  scaling_cmd->add_option("--p0", cfg.scaling_p0)->capture_default_str();
  scaling_cmd->add_option("--min-height", cfg.scaling_min_height)->capture_default_str();
  scaling_cmd->add_option("--max-height", cfg.scaling_max_height)->capture_default_str();
  scaling_cmd->add_option("--window-lo", cfg.window_lo)->capture_default_str();
  scaling_cmd->add_option("--window-hi", cfg.window_hi)->capture_default_str();
  auto* size_cmd = app.add_subcommand("size", "sensors needed for a target error");
  size_cmd->add_option("--epsilon", cfg.epsilon)->required();
  size_cmd->add_option("--l0", cfg.l0, "L0 (defaults to alpha0 + beta0)");
  auto* decay_cmd = app.add_subcommand("decay", "classify how fast the failure schedule decays");
  decay_cmd->add_option("--horizon", cfg.decay_horizon)->capture_default_str();
  decay_cmd->add_option("--threshold", cfg.decay_threshold)->capture_default_str();
  for (auto* sub : {evolve_cmd, bounds_cmd, sim_cmd, oracle_cmd, regions_cmd, ratios_cmd, scaling_cmd, size_cmd,
                    decay_cmd}) {
    sub->fallthrough();
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  cfg.prior0_given = prior_opt->count() > 0;

  try {
    const std::string body = render(cfg);
    if (cfg.out_path.empty()) {
      out << body;
    } else {
      detail::write_file(detail::output_path(cfg.out_path), body);
    }
    return kOk;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kDomainError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace relaytree::cli
