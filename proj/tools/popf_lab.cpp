// popf-lab: scenario generation, period/traditional OPF runs, schedule audits.
//
// Exit codes: 0 ok, 2 parse/input, 3 model build, 4 solve, 5 verify/emit.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "popf/popf.hpp"

namespace fs = std::filesystem;
using namespace popf;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitBuild = 3;
constexpr int kExitSolve = 4;
constexpr int kExitVerify = 5;

ScenarioSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open spec file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ScenarioSpec spec;
  std::istringstream lines(buf.str());
  std::string raw;
  int line_no = 0;
  while (std::getline(lines, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto pos = line.find('#'); pos != std::string::npos) line = line.substr(0, pos);
    std::string t{detail::trim(line)};
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError("spec line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key{detail::trim(t.substr(0, eq))};
    std::string val{detail::trim(t.substr(eq + 1))};
    auto num = [&] { return detail::parse_num(val, key); };
    if (key == "base_case") spec.base_case = val;
    else if (key == "penetration") spec.penetration = num();
    else if (key == "wind_share") spec.wind_share = num();
    else if (key == "wind_units") spec.wind_units = static_cast<int>(num());
    else if (key == "solar_units") spec.solar_units = static_cast<int>(num());
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(num());
    else if (key == "horizon_hours") spec.horizon_hours = num();
    else if (key == "dt_hours") spec.dt_hours = num();
    else if (key == "load_base") spec.load_base = num();
    else if (key == "load_swing") spec.load_swing = num();
    else throw ParseError("unknown spec key '" + key + "'");
  }
  if (spec.base_case.empty()) throw ParseError("spec is missing 'base_case'");
  return spec;
}

int cmd_generate(const std::string& spec_path, const std::string& out_dir) {
  ScenarioSpec spec;
  try {
    spec = parse_spec_file(spec_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  try {
    Scenario scenario = generate_scenario(spec);
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "case.m", serialize_case(scenario.net));
    write_text_file(fs::path(out_dir) / "forecast.csv",
                    serialize_forecast_csv(scenario.forecast));
    std::ostringstream info;
    info << "base_case = " << spec.base_case << "\n";
    info << "penetration = " << spec.penetration << "\n";
    info << "wind_share = " << spec.wind_share << "\n";
    info << "seed = " << spec.seed << "\n";
    info << "wind_buses =";
    for (int b : scenario.wind_buses) info << " " << b;
    info << "\nsolar_buses =";
    for (int b : scenario.solar_buses) info << " " << b;
    info << "\n";
    write_text_file(fs::path(out_dir) / "scenario_info.txt", info.str());
    std::cout << "wrote " << out_dir << "/case.m, forecast.csv, scenario_info.txt\n";
    return 0;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBuild;
  }
}

std::string render_single(const std::string& mode, const ViolationReport& report,
                          const PeriodSchedule& sched) {
  std::ostringstream out;
  char buf[160];
  out << "interval        " << mode << " power   voltage      cost($/h)\n";
  for (std::size_t k = 0; k < report.intervals.size(); ++k) {
    const auto& iv = report.intervals[k];
    std::snprintf(buf, sizeof(buf), "%5.2fh-%-5.2fh  %-12s %-12s %12.2f\n",
                  sched.intervals[k].interval.t_start, sched.intervals[k].interval.t_end,
                  format_cvn_cva(iv.power_cvn, iv.power_cva).c_str(),
                  format_cvn_cva(iv.voltage_cvn, iv.voltage_cva).c_str(),
                  sched.intervals[k].cost_per_h);
    out << buf;
  }
  return out.str();
}

int cmd_run(const std::string& config_path) {
  RunConfig cfg;
  NetworkCase net;
  ForecastSeries forecast;
  try {
    cfg = load_config(config_path);
    if (cfg.case_path.empty() || cfg.forecast_path.empty())
      throw ParseError("config must set 'case' and 'forecast'");
    net = load_case(cfg.case_path);
    for (const auto& finding : validate(net))
      std::cerr << "case warning: " << finding.what << "\n";
    forecast = equivalent_load(load_forecast_csv(cfg.forecast_path));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }

  AdmittanceMatrix adm;
  std::vector<LinearInterval> intervals;
  FrequencyResponseModel freq;
  PopfOptions options;
  try {
    if (!std::isnan(cfg.horizon_start_h) || !std::isnan(cfg.horizon_hours) ||
        !std::isnan(cfg.interval_hours)) {
      double start = std::isnan(cfg.horizon_start_h) ? forecast.start_h() : cfg.horizon_start_h;
      double hours = std::isnan(cfg.horizon_hours) ? forecast.end_h() - start : cfg.horizon_hours;
      double dt = std::isnan(cfg.interval_hours) ? forecast.dt_h() : cfg.interval_hours;
      forecast = forecast.resample(start, start + hours, dt);
    }
    adm = build_admittance(net);
    freq = FrequencyResponseModel::from_case(net, cfg.k_f, cfg.freq_sign_flip);
    IntervalConfig ic;
    ic.mu = cfg.mu;
    ic.mu_rel = cfg.mu_rel;
    ic.max_depth = cfg.max_depth;
    ic.min_width_h = cfg.min_width_h;
    ic.use_difference_norm = cfg.use_difference_norm;
    intervals = build_intervals(net, adm, forecast, baseline_dispatch(net), ic);

    options.ipm.tolerance = cfg.nlp_tol;
    options.ipm.max_iterations = cfg.nlp_max_iter;
    options.ipm.mu_init = cfg.mu_init;
    options.mu_init_warm = cfg.mu_init_warm;
    options.warm_start = cfg.warm_start;
    options.opf.endpoint_inequalities = cfg.endpoint_inequalities;
    options.opf.enforce_slack_limits = cfg.enforce_slack_limits;
    options.topf_snapshot_frac = cfg.topf_snapshot_frac;
    options.newton.tolerance = cfg.pf_tol;
    options.newton.max_iterations = cfg.pf_max_iter;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBuild;
  }

  std::optional<PeriodSchedule> popf_sched, topf_sched;
  try {
    if (cfg.mode != RunMode::kTopf)
      popf_sched = run_period(net, adm, forecast, freq, intervals, options);
    if (cfg.mode != RunMode::kPopf)
      topf_sched = run_topf(net, adm, forecast, freq, intervals, options);
  } catch (const Error& e) {
    std::cerr << "solve error: " << e.what() << "\n";
    return kExitSolve;
  }

  try {
    fs::create_directories(cfg.out_dir);
    write_text_file(fs::path(cfg.out_dir) / "resolved_config.txt", serialize_config(cfg));

    std::optional<ViolationReport> popf_report, topf_report;
    if (popf_sched) {
      popf_report = dense_check(*popf_sched, net, adm, forecast, cfg.samples_per_interval,
                                cfg.verify_tol, options.newton);
      write_text_file(fs::path(cfg.out_dir) / "schedule_popf.json",
                      schedule_to_json(*popf_sched, cfg.case_path, cfg.forecast_path).dump(2) +
                          "\n");
      write_text_file(fs::path(cfg.out_dir) / "violations_popf.json",
                      violations_to_json(*popf_report).dump(2) + "\n");
    }
    if (topf_sched) {
      topf_report = dense_check(*topf_sched, net, adm, forecast, cfg.samples_per_interval,
                                cfg.verify_tol, options.newton);
      write_text_file(fs::path(cfg.out_dir) / "schedule_topf.json",
                      schedule_to_json(*topf_sched, cfg.case_path, cfg.forecast_path).dump(2) +
                          "\n");
      write_text_file(fs::path(cfg.out_dir) / "violations_topf.json",
                      violations_to_json(*topf_report).dump(2) + "\n");
    }

    std::string table;
    if (popf_sched && topf_sched) {
      ComparisonSummary cmp = compare(*topf_report, *popf_report, *topf_sched, *popf_sched);
      table = render_comparison(cmp);
      write_text_file(fs::path(cfg.out_dir) / "plot_cost.csv", cost_plot_csv(cmp));
      write_text_file(fs::path(cfg.out_dir) / "plot_violations.csv", violation_plot_csv(cmp));
    } else if (popf_sched) {
      table = render_single("POPF", *popf_report, *popf_sched);
    } else {
      table = render_single("TOPF", *topf_report, *topf_sched);
    }
    write_text_file(fs::path(cfg.out_dir) / "report.txt", table);
    std::cout << table;
    return 0;
  } catch (const Error& e) {
    std::cerr << "verify/emit error: " << e.what() << "\n";
    return kExitVerify;
  }
}

int cmd_verify(const std::string& schedule_path, int samples) {
  PeriodSchedule sched;
  NetworkCase net;
  ForecastSeries forecast;
  std::string case_path, forecast_path;
  try {
    std::ifstream in(schedule_path);
    if (!in) throw ParseError("cannot open schedule file: " + schedule_path);
    Json doc = Json::parse(in, nullptr, true, true);
    sched = json_to_schedule(doc);
    case_path = doc.at("case").get<std::string>();
    forecast_path = doc.at("forecast").get<std::string>();
    net = load_case(case_path);
    forecast = equivalent_load(load_forecast_csv(forecast_path));
  } catch (const Json::exception& e) {
    std::cerr << "error: schedule document: " << e.what() << "\n";
    return kExitParse;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  try {
    AdmittanceMatrix adm = build_admittance(net);
    ViolationReport report = dense_check(sched, net, adm, forecast, samples);
    std::cout << render_single(sched.mode == "topf" ? "TOPF" : "POPF", report, sched);
    std::cout << "totals: power " << format_cvn_cva(report.total_power_cvn(),
                                                    report.total_power_cva())
              << "  voltage "
              << format_cvn_cva(report.total_voltage_cvn(), report.total_voltage_cva()) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "verify error: " << e.what() << "\n";
    return kExitVerify;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"period optimal power flow lab"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "build a synthetic scenario from a base case");
  std::string spec_path, out_dir = "out";
  gen->add_option("--spec", spec_path, "scenario spec file")->required();
  gen->add_option("--out", out_dir, "output directory");

  auto* run = app.add_subcommand("run", "solve and audit a configured horizon");
  std::string config_path;
  run->add_option("--config", config_path, "run configuration file")->required();

  auto* verify = app.add_subcommand("verify", "re-audit a saved schedule");
  std::string schedule_path;
  int samples = 101;
  verify->add_option("--schedule", schedule_path, "schedule document")->required();
  verify->add_option("--samples", samples, "samples per interval");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) return cmd_generate(spec_path, out_dir);
  if (run->parsed()) return cmd_run(config_path);
  if (verify->parsed()) return cmd_verify(schedule_path, samples);
  return 1;
}
