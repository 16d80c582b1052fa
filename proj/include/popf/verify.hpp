#pragma once

// Schedule auditing: dense interior sampling of voltage and branch-power
// limits, endpoint extremality margins, and the voltage isometry comparison.
// Every sample is a fresh power flow solve, independent of solver-internal
// state.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "popf/schedule.hpp"

namespace popf {

struct SampleViolation {
  double time_h = 0.0;
  std::string constraint;
  double amount = 0.0;  // MW for branch limits, p.u. for voltages
};

struct IntervalViolations {
  int power_cvn = 0;       // violated branch-end checks at the worst sample
  double power_cva = 0.0;  // summed violation magnitude there, MW
  int voltage_cvn = 0;
  double voltage_cva = 0.0;  // p.u.
  double worst_power_time_h = 0.0;
  double worst_voltage_time_h = 0.0;
  std::vector<SampleViolation> detail;  // all violations across samples
  int diverged_samples = 0;
};

struct ViolationReport {
  std::vector<IntervalViolations> intervals;
  int samples_per_interval = 0;

  int total_power_cvn() const {
    int s = 0;
    for (const auto& iv : intervals) s += iv.power_cvn;
    return s;
  }
  int total_voltage_cvn() const {
    int s = 0;
    for (const auto& iv : intervals) s += iv.voltage_cvn;
    return s;
  }
  double total_power_cva() const {
    double s = 0;
    for (const auto& iv : intervals) s += iv.power_cva;
    return s;
  }
  double total_voltage_cva() const {
    double s = 0;
    for (const auto& iv : intervals) s += iv.voltage_cva;
    return s;
  }
};

/// Table-2-style "count/amount" cell, e.g. (9, 2.3479) -> "9/2.3479".
inline std::string format_cvn_cva(int cvn, double cva) {
  if (cvn == 0 && cva == 0.0) return "0/0";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%d/%.4f", cvn, cva);
  return buf;
}

namespace detail {

struct SampleAudit {
  int power_cvn = 0;
  double power_cva = 0.0;
  int voltage_cvn = 0;
  double voltage_cva = 0.0;
  std::vector<SampleViolation> items;
};

inline SampleAudit audit_state(const VoltageState& st, const NetworkCase& net, double tol) {
  SampleAudit a;
  for (int i = 0; i < net.bus_count(); ++i) {
    const auto& b = net.buses[i];
    double v = st.magnitude(i);
    double over = std::max(v - b.v_max, b.v_min - v);
    if (over > tol) {
      ++a.voltage_cvn;
      a.voltage_cva += over;
      a.items.push_back({st.time_h, "bus " + std::to_string(b.id) + " voltage", over});
    }
  }
  auto flows = branch_flows(st, net);
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const auto& br = net.branches[k];
    if (br.status <= 0) continue;
    double lim = br.p_line_max_mw();
    if (!std::isfinite(lim)) continue;
    std::string name = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    double over_f = std::abs(flows[k].p_from_mw) - lim;
    if (over_f > tol * net.base_mva) {
      ++a.power_cvn;
      a.power_cva += over_f;
      a.items.push_back({st.time_h, name + " from-end", over_f});
    }
    double over_t = std::abs(flows[k].p_to_mw) - lim;
    if (over_t > tol * net.base_mva) {
      ++a.power_cvn;
      a.power_cva += over_t;
      a.items.push_back({st.time_h, name + " to-end", over_t});
    }
  }
  return a;
}

}  // namespace detail

/// Dense constraint audit: m equally spaced samples per interval, controls
/// from the schedule's gain mapping, limits per the case file, tolerance in
/// p.u. CVN/CVA are taken at the per-category worst sample of each interval.
inline ViolationReport dense_check(const PeriodSchedule& schedule, const NetworkCase& net,
                                   const AdmittanceMatrix& adm, const ForecastSeries& forecast,
                                   int samples_per_interval = 101, double tol = 1e-6,
                                   const NewtonOptions& newton = {}) {
  if (samples_per_interval < 2) throw Error("dense check needs at least 2 samples per interval");
  ViolationReport report;
  report.samples_per_interval = samples_per_interval;
  const FlowIndex idx(net);

  for (const auto& sched : schedule.intervals) {
    IntervalViolations iv;
    double best_power = -1.0, best_voltage = -1.0;
    for (int m = 0; m < samples_per_interval; ++m) {
      double t = sched.interval.t_start +
                 sched.interval.width() * m / (samples_per_interval - 1);
      Vector gp = sched.dispatch_mw(t);
      BusDispatch d = aggregate_dispatch(net, gp, sched.gen_v_set);
      Vector p_pu, q_pu;
      forecast.sample_pu(t, net, p_pu, q_pu);
      Vector g = RhsBuilder::build(net, idx, p_pu, q_pu, d.p_source_pu, d.v_set);
      VoltageState x0 = sched.state_start;
      x0.time_h = t;
      VoltageState st;
      try {
        st = solve_power_flow(net, adm, g, x0, newton).state;
      } catch (const Error&) {
        ++iv.diverged_samples;
        iv.detail.push_back({t, "power flow divergence", 0.0});
        continue;
      }
      auto audit = detail::audit_state(st, net, tol);
      if (audit.power_cva > best_power) {
        best_power = audit.power_cva;
        iv.power_cvn = audit.power_cvn;
        iv.power_cva = audit.power_cva;
        iv.worst_power_time_h = t;
      }
      if (audit.voltage_cva > best_voltage) {
        best_voltage = audit.voltage_cva;
        iv.voltage_cvn = audit.voltage_cvn;
        iv.voltage_cva = audit.voltage_cva;
        iv.worst_voltage_time_h = t;
      }
      for (auto& item : audit.items) iv.detail.push_back(std::move(item));
    }
    report.intervals.push_back(std::move(iv));
  }
  return report;
}

struct ExtremalityMargin {
  double worst_eps = 0.0;  // how far any interior sample exceeds the endpoint envelope
  std::string worst_quantity;
  double worst_time_h = 0.0;
};

/// Interior extremes vs endpoint extremes for every branch flow and voltage
/// magnitude; positive margin means an interior sample escaped the envelope.
inline std::vector<ExtremalityMargin> extremality_check(const PeriodSchedule& schedule,
                                                        const NetworkCase& net,
                                                        const AdmittanceMatrix& adm,
                                                        const ForecastSeries& forecast,
                                                        int samples_per_interval = 101,
                                                        const NewtonOptions& newton = {}) {
  std::vector<ExtremalityMargin> out;
  const FlowIndex idx(net);
  const int n = net.bus_count();
  const int nb = static_cast<int>(net.branches.size());

  for (const auto& sched : schedule.intervals) {
    // quantity vector: n voltage magnitudes then 2 per branch (p.u.)
    auto quantities = [&](const VoltageState& st) {
      Vector q(n + 2 * nb);
      for (int i = 0; i < n; ++i) q[i] = st.magnitude(i);
      auto flows = branch_flows(st, net);
      for (int k = 0; k < nb; ++k) {
        q[n + 2 * k] = flows[k].p_from_mw / net.base_mva;
        q[n + 2 * k + 1] = flows[k].p_to_mw / net.base_mva;
      }
      return q;
    };
    auto solve_at = [&](double t, const VoltageState& hint) {
      Vector gp = sched.dispatch_mw(t);
      BusDispatch d = aggregate_dispatch(net, gp, sched.gen_v_set);
      Vector p_pu, q_pu;
      forecast.sample_pu(t, net, p_pu, q_pu);
      Vector g = RhsBuilder::build(net, idx, p_pu, q_pu, d.p_source_pu, d.v_set);
      VoltageState x0 = hint;
      x0.time_h = t;
      return solve_power_flow(net, adm, g, x0, newton).state;
    };

    VoltageState s0 = solve_at(sched.interval.t_start, sched.state_start);
    VoltageState s1 = solve_at(sched.interval.t_end, sched.state_start);
    Vector q0 = quantities(s0), q1 = quantities(s1);
    Vector hi = q0.cwiseMax(q1), lo = q0.cwiseMin(q1);

    ExtremalityMargin margin;
    margin.worst_eps = -std::numeric_limits<double>::infinity();
    for (int m = 1; m + 1 < samples_per_interval; ++m) {
      double t = sched.interval.t_start +
                 sched.interval.width() * m / (samples_per_interval - 1);
      Vector q = quantities(solve_at(t, s0));
      for (int j = 0; j < q.size(); ++j) {
        double eps = std::max(q[j] - hi[j], lo[j] - q[j]);
        if (eps > margin.worst_eps) {
          margin.worst_eps = eps;
          margin.worst_time_h = t;
          margin.worst_quantity =
              j < n ? "bus " + std::to_string(net.buses[j].id) + " voltage"
                    : "branch " + std::to_string(net.branches[(j - n) / 2].from_bus) + "-" +
                          std::to_string(net.branches[(j - n) / 2].to_bus) +
                          ((j - n) % 2 == 0 ? " from-end" : " to-end");
        }
      }
    }
    out.push_back(std::move(margin));
  }
  return out;
}

struct IsometryEntry {
  double dist_start = 0.0;  // |x(t_{k-1}) - x(t_m)|
  double dist_end = 0.0;    // |x(t_k) - x(t_m)|
  double relative_gap = 0.0;
};

struct IsometryReport {
  std::vector<IsometryEntry> intervals;
  double worst_gap() const {
    double w = 0.0;
    for (const auto& e : intervals) w = std::max(w, e.relative_gap);
    return w;
  }
};

/// Euclidean-norm comparison of the endpoint-to-median state differences.
inline IsometryReport isometry_check(const PeriodSchedule& schedule) {
  IsometryReport report;
  for (const auto& sched : schedule.intervals) {
    IsometryEntry e;
    e.dist_start = (sched.state_start.x - sched.state_median.x).norm();
    e.dist_end = (sched.state_end.x - sched.state_median.x).norm();
    double denom = std::max(e.dist_start, e.dist_end);
    e.relative_gap = denom > 0.0 ? std::abs(e.dist_start - e.dist_end) / denom : 0.0;
    report.intervals.push_back(e);
  }
  return report;
}

struct ComparisonRow {
  double t_start = 0.0, t_end = 0.0;
  IntervalViolations topf, popf;
  double topf_cost = 0.0, popf_cost = 0.0;
};

struct ComparisonSummary {
  std::vector<ComparisonRow> rows;
  double topf_period_cost = 0.0, popf_period_cost = 0.0;
};

/// Side-by-side per-interval table of both models' violations and costs.
inline ComparisonSummary compare(const ViolationReport& topf_report,
                                 const ViolationReport& popf_report,
                                 const PeriodSchedule& topf, const PeriodSchedule& popf) {
  if (topf.intervals.size() != popf.intervals.size() ||
      topf_report.intervals.size() != popf_report.intervals.size() ||
      topf.intervals.size() != topf_report.intervals.size())
    throw Error("comparison inputs cover different horizons");
  for (std::size_t k = 0; k < topf.intervals.size(); ++k) {
    if (std::abs(topf.intervals[k].interval.t_start - popf.intervals[k].interval.t_start) > 1e-9)
      throw Error("comparison inputs cover different horizons");
  }
  ComparisonSummary out;
  for (std::size_t k = 0; k < topf.intervals.size(); ++k) {
    ComparisonRow row;
    row.t_start = topf.intervals[k].interval.t_start;
    row.t_end = topf.intervals[k].interval.t_end;
    row.topf = topf_report.intervals[k];
    row.popf = popf_report.intervals[k];
    row.topf_cost = topf.intervals[k].cost_per_h;
    row.popf_cost = popf.intervals[k].cost_per_h;
    out.rows.push_back(std::move(row));
  }
  out.topf_period_cost = topf.period_cost();
  out.popf_period_cost = popf.period_cost();
  return out;
}

/// Human-readable table mirroring the count/amount row layout.
inline std::string render_comparison(const ComparisonSummary& cmp) {
  std::ostringstream out;
  char buf[256];
  out << "interval        TOPF power   TOPF voltage  TOPF cost($/h)  "
         "POPF power   POPF voltage  POPF cost($/h)\n";
  for (const auto& row : cmp.rows) {
    std::snprintf(buf, sizeof(buf), "%5.2fh-%-5.2fh  %-12s %-13s %14.2f  %-12s %-13s %14.2f\n",
                  row.t_start, row.t_end,
                  format_cvn_cva(row.topf.power_cvn, row.topf.power_cva).c_str(),
                  format_cvn_cva(row.topf.voltage_cvn, row.topf.voltage_cva).c_str(),
                  row.topf_cost,
                  format_cvn_cva(row.popf.power_cvn, row.popf.power_cva).c_str(),
                  format_cvn_cva(row.popf.voltage_cvn, row.popf.voltage_cva).c_str(),
                  row.popf_cost);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "period cost: TOPF %.2f $  POPF %.2f $\n",
                cmp.topf_period_cost, cmp.popf_period_cost);
  out << buf;
  return out.str();
}

}  // namespace popf
