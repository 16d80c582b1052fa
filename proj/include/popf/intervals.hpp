#pragma once

// Linear-time-interval construction: each forecasting interval is bisected
// until the Jacobian infinity norms at its solved endpoint states differ by
// less than the threshold.

#include <cmath>
#include <limits>
#include <vector>

#include "popf/forecast.hpp"

namespace popf {

struct LinearInterval {
  double t_start = 0.0;
  double t_end = 0.0;
  int parent = 0;       // forecasting interval index
  int depth = 0;        // bisection depth
  double jac_norm_start = 0.0;
  double jac_norm_end = 0.0;
  bool guard_hit = false;  // emitted by the depth/width guard, criterion unmet

  double width() const { return t_end - t_start; }
  double median() const { return 0.5 * (t_start + t_end); }
};

struct IntervalConfig {
  double mu = 0.0;           // absolute norm-difference threshold; 0 = use mu_rel
  double mu_rel = 0.05;      // threshold as a fraction of |J(t_0)|_inf
  int max_depth = 10;
  double min_width_h = 1.0 / 64.0;
  bool use_difference_norm = false;  // stronger variant: |J(a) - J(b)|_inf < mu
};

/// Max over rows of the sum of absolute entries.
inline double jac_inf_norm(const SparseMatrix& jac) {
  Vector row_sums = Vector::Zero(jac.rows());
  for (int col = 0; col < jac.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(jac, col); it; ++it)
      row_sums[it.row()] += std::abs(it.value());
  return jac.rows() == 0 ? 0.0 : row_sums.maxCoeff();
}

/// Snapshot solve used by the builder and its auditors: baseline dispatch,
/// loads sampled from the forecast.
inline PowerFlowResult solve_snapshot(const NetworkCase& net, const AdmittanceMatrix& adm,
                                      const ForecastSeries& forecast, const BusDispatch& dispatch,
                                      double t, const NewtonOptions& opt = {}) {
  const FlowIndex idx(net);
  Vector p_pu, q_pu;
  forecast.sample_pu(t, net, p_pu, q_pu);
  Vector g = RhsBuilder::build(net, idx, p_pu, q_pu, dispatch.p_source_pu, dispatch.v_set);
  VoltageState x0 = flat_start(net, t);
  // slack magnitude follows the dispatch setpoint
  int sl = net.slack_index();
  x0.x[2 * sl] = dispatch.v_set[sl];
  try {
    auto result = solve_power_flow(net, adm, g, x0, opt);
    result.state.time_h = t;
    return result;
  } catch (const DivergenceError& e) {
    throw Error("interval builder: power flow diverged at t=" + std::to_string(t) +
                " h: " + e.what());
  }
}

/// Dispatch from the case file's scheduled Pg / Vg.
inline BusDispatch baseline_dispatch(const NetworkCase& net) {
  const int ng = static_cast<int>(net.generators.size());
  Vector gp(ng), gv(ng);
  for (int g = 0; g < ng; ++g) {
    gp[g] = net.generators[g].pg_mw;
    gv[g] = net.generators[g].v_set;
  }
  return aggregate_dispatch(net, gp, gv);
}

namespace detail {

struct NormProbe {
  double norm;          // |J|_inf at the solved state
  SparseMatrix jac;     // kept only when the difference norm is requested
};

inline NormProbe probe(const NetworkCase& net, const AdmittanceMatrix& adm,
                       const ForecastSeries& forecast, const BusDispatch& dispatch, double t,
                       bool keep_jac) {
  const FlowIndex idx(net);
  auto solved = solve_snapshot(net, adm, forecast, dispatch, t);
  SparseMatrix jac = jacobian(solved.state, adm, net, idx);
  NormProbe p{jac_inf_norm(jac), {}};
  if (keep_jac) p.jac = std::move(jac);
  return p;
}

inline bool criterion_met(const NormProbe& a, const NormProbe& b, double mu,
                          bool use_difference_norm) {
  if (use_difference_norm) return jac_inf_norm(SparseMatrix(a.jac - b.jac)) < mu;
  return std::abs(a.norm - b.norm) < mu;
}

}  // namespace detail

/// Partition the forecast horizon into linear time intervals.
inline std::vector<LinearInterval> build_intervals(const NetworkCase& net,
                                                   const AdmittanceMatrix& adm,
                                                   const ForecastSeries& forecast,
                                                   const BusDispatch& dispatch,
                                                   const IntervalConfig& config) {
  const bool diff_norm = config.use_difference_norm;
  double mu = config.mu;
  if (mu <= 0.0) {
    auto first = detail::probe(net, adm, forecast, dispatch, forecast.start_h(), false);
    mu = config.mu_rel * first.norm;
  }

  std::vector<LinearInterval> out;
  struct Span {
    double a, b;
    detail::NormProbe pa, pb;
    int depth;
  };

  for (int k = 0; k < forecast.interval_count(); ++k) {
    double a = forecast.times_h[k];
    double b = forecast.times_h[k + 1];
    std::vector<LinearInterval> pieces;
    // explicit stack, left-to-right emission order
    std::vector<Span> stack;
    stack.push_back({a, b, detail::probe(net, adm, forecast, dispatch, a, diff_norm),
                     detail::probe(net, adm, forecast, dispatch, b, diff_norm), 0});
    while (!stack.empty()) {
      Span s = std::move(stack.back());
      stack.pop_back();
      bool ok = detail::criterion_met(s.pa, s.pb, mu, diff_norm);
      bool can_split =
          s.depth < config.max_depth && (s.b - s.a) / 2.0 >= config.min_width_h - 1e-12;
      if (ok || !can_split) {
        LinearInterval iv;
        iv.t_start = s.a;
        iv.t_end = s.b;
        iv.parent = k;
        iv.depth = s.depth;
        iv.jac_norm_start = s.pa.norm;
        iv.jac_norm_end = s.pb.norm;
        iv.guard_hit = !ok;
        pieces.push_back(iv);
        continue;
      }
      double mid = 0.5 * (s.a + s.b);
      auto pm = detail::probe(net, adm, forecast, dispatch, mid, diff_norm);
      // push right first so the left half is processed (and emitted) first
      stack.push_back({mid, s.b, pm, std::move(s.pb), s.depth + 1});
      stack.push_back({s.a, mid, std::move(s.pa), std::move(pm), s.depth + 1});
    }
    std::sort(pieces.begin(), pieces.end(),
              [](const LinearInterval& l, const LinearInterval& r) { return l.t_start < r.t_start; });
    out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return out;
}

}  // namespace popf
