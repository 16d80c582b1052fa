#pragma once

// Flat key-value run configuration ("key = value" lines, '#' comments).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "popf/core.hpp"

namespace popf {

enum class RunMode { kPopf, kTopf, kBoth };

struct RunConfig {
  std::string case_path;
  std::string forecast_path;
  std::string out_dir = "out";
  RunMode mode = RunMode::kBoth;

  // horizon selection; NaN start/length means "whole forecast grid"
  double horizon_start_h = std::numeric_limits<double>::quiet_NaN();
  double horizon_hours = std::numeric_limits<double>::quiet_NaN();
  double interval_hours = std::numeric_limits<double>::quiet_NaN();

  // interval construction
  double mu = 0.0;  // absolute threshold; 0 = relative
  double mu_rel = 0.05;
  int max_depth = 10;
  double min_width_h = 1.0 / 64.0;
  bool use_difference_norm = false;

  // power flow / optimizer
  double pf_tol = 1e-8;
  int pf_max_iter = 20;
  double nlp_tol = 1e-6;
  int nlp_max_iter = 200;
  double mu_init = 0.1;
  double mu_init_warm = 0.01;
  bool warm_start = true;
  bool endpoint_inequalities = true;
  bool enforce_slack_limits = false;
  double topf_snapshot_frac = 0.0;

  // frequency response
  double k_f = 1.0;
  bool freq_sign_flip = false;

  // verification
  int samples_per_interval = 101;
  double verify_tol = 1e-6;

  std::uint64_t seed = 0;
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError("config key '" + key + "': expected boolean, got '" + v + "'");
}

inline double parse_num(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': expected number, got '" + v + "'");
  }
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::map<std::string, std::string> kv;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto pos = line.find('#'); pos != std::string::npos) line = line.substr(0, pos);
    std::string t{detail::trim(line)};
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key{detail::trim(t.substr(0, eq))};
    std::string val{detail::trim(t.substr(eq + 1))};
    kv[key] = val;
  }

  using detail::parse_bool;
  using detail::parse_num;
  for (const auto& [key, val] : kv) {
    if (key == "case") cfg.case_path = val;
    else if (key == "forecast") cfg.forecast_path = val;
    else if (key == "out_dir") cfg.out_dir = val;
    else if (key == "mode") {
      if (val == "popf") cfg.mode = RunMode::kPopf;
      else if (val == "topf") cfg.mode = RunMode::kTopf;
      else if (val == "both") cfg.mode = RunMode::kBoth;
      else throw ParseError("config key 'mode': expected popf|topf|both, got '" + val + "'");
    } else if (key == "preset") {
      if (val == "dayahead") {
        cfg.horizon_start_h = 0.0;
        cfg.horizon_hours = 24.0;
        cfg.interval_hours = 1.0;
      } else if (val == "realtime") {
        cfg.horizon_start_h = 9.0;
        cfg.horizon_hours = 1.5;
        cfg.interval_hours = 0.25;
      } else {
        throw ParseError("config key 'preset': expected dayahead|realtime, got '" + val + "'");
      }
    } else if (key == "horizon_start_h") cfg.horizon_start_h = parse_num(val, key);
    else if (key == "horizon_hours") cfg.horizon_hours = parse_num(val, key);
    else if (key == "interval_hours") cfg.interval_hours = parse_num(val, key);
    else if (key == "mu") cfg.mu = val == "inf" ? std::numeric_limits<double>::infinity()
                                                : parse_num(val, key);
    else if (key == "mu_rel") cfg.mu_rel = parse_num(val, key);
    else if (key == "max_depth") cfg.max_depth = static_cast<int>(parse_num(val, key));
    else if (key == "min_width_h") cfg.min_width_h = parse_num(val, key);
    else if (key == "use_difference_norm") cfg.use_difference_norm = parse_bool(val, key);
    else if (key == "pf_tol") cfg.pf_tol = parse_num(val, key);
    else if (key == "pf_max_iter") cfg.pf_max_iter = static_cast<int>(parse_num(val, key));
    else if (key == "nlp_tol") cfg.nlp_tol = parse_num(val, key);
    else if (key == "nlp_max_iter") cfg.nlp_max_iter = static_cast<int>(parse_num(val, key));
    else if (key == "mu_init") cfg.mu_init = parse_num(val, key);
    else if (key == "mu_init_warm") cfg.mu_init_warm = parse_num(val, key);
    else if (key == "warm_start") cfg.warm_start = parse_bool(val, key);
    else if (key == "endpoint_inequalities") cfg.endpoint_inequalities = parse_bool(val, key);
    else if (key == "enforce_slack_limits") cfg.enforce_slack_limits = parse_bool(val, key);
    else if (key == "topf_snapshot") {
      if (val == "start") cfg.topf_snapshot_frac = 0.0;
      else if (val == "median") cfg.topf_snapshot_frac = 0.5;
      else if (val == "end") cfg.topf_snapshot_frac = 1.0;
      else cfg.topf_snapshot_frac = parse_num(val, key);
      if (cfg.topf_snapshot_frac < 0.0 || cfg.topf_snapshot_frac > 1.0)
        throw ParseError("config key 'topf_snapshot': fraction must lie in [0, 1]");
    } else if (key == "k_f") cfg.k_f = parse_num(val, key);
    else if (key == "freq_sign_flip") cfg.freq_sign_flip = parse_bool(val, key);
    else if (key == "samples_per_interval")
      cfg.samples_per_interval = static_cast<int>(parse_num(val, key));
    else if (key == "verify_tol") cfg.verify_tol = parse_num(val, key);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_num(val, key));
    else throw ParseError("unknown config key '" + key + "'");
  }

  if (cfg.pf_tol <= 0 || cfg.nlp_tol <= 0 || cfg.verify_tol <= 0)
    throw ParseError("tolerances must be positive");
  if (cfg.samples_per_interval < 2) throw ParseError("samples_per_interval must be at least 2");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

/// Fully resolved echo of a config, written next to every run's outputs.
inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "case = " << c.case_path << "\n";
  out << "forecast = " << c.forecast_path << "\n";
  out << "out_dir = " << c.out_dir << "\n";
  out << "mode = "
      << (c.mode == RunMode::kPopf ? "popf" : c.mode == RunMode::kTopf ? "topf" : "both") << "\n";
  if (!std::isnan(c.horizon_start_h)) out << "horizon_start_h = " << num(c.horizon_start_h) << "\n";
  if (!std::isnan(c.horizon_hours)) out << "horizon_hours = " << num(c.horizon_hours) << "\n";
  if (!std::isnan(c.interval_hours)) out << "interval_hours = " << num(c.interval_hours) << "\n";
  out << "mu = " << (std::isinf(c.mu) ? "inf" : num(c.mu)) << "\n";
  out << "mu_rel = " << num(c.mu_rel) << "\n";
  out << "max_depth = " << c.max_depth << "\n";
  out << "min_width_h = " << num(c.min_width_h) << "\n";
  out << "use_difference_norm = " << (c.use_difference_norm ? "true" : "false") << "\n";
  out << "pf_tol = " << num(c.pf_tol) << "\n";
  out << "pf_max_iter = " << c.pf_max_iter << "\n";
  out << "nlp_tol = " << num(c.nlp_tol) << "\n";
  out << "nlp_max_iter = " << c.nlp_max_iter << "\n";
  out << "mu_init = " << num(c.mu_init) << "\n";
  out << "mu_init_warm = " << num(c.mu_init_warm) << "\n";
  out << "warm_start = " << (c.warm_start ? "true" : "false") << "\n";
  out << "endpoint_inequalities = " << (c.endpoint_inequalities ? "true" : "false") << "\n";
  out << "enforce_slack_limits = " << (c.enforce_slack_limits ? "true" : "false") << "\n";
  out << "topf_snapshot = " << num(c.topf_snapshot_frac) << "\n";
  out << "k_f = " << num(c.k_f) << "\n";
  out << "freq_sign_flip = " << (c.freq_sign_flip ? "true" : "false") << "\n";
  out << "samples_per_interval = " << c.samples_per_interval << "\n";
  out << "verify_tol = " << num(c.verify_tol) << "\n";
  out << "seed = " << c.seed << "\n";
  return out.str();
}

}  // namespace popf
