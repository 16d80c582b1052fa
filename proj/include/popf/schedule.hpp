#pragma once

// Interval solves and horizon orchestration: warm-start chaining for the
// period model, the single-snapshot baseline, and the energy bookkeeping.

#include <optional>
#include <sstream>

#include "popf/period_opf.hpp"

namespace popf {

struct IntervalSchedule {
  LinearInterval interval;
  Vector gen_p_mw;        // per generator, anchored at the median snapshot
  Vector gen_v_set;       // per generator, constant across the interval
  Vector gains_mw_per_h;  // per generator, as applied by the solver
  VoltageState state_start, state_median, state_end;
  double cost_per_h = 0.0;  // generation cost at the median snapshot
  Vector energy_mwh;        // per bus, Eq-29-style net energy over the interval
  int iterations = 0;
  bool converged = true;
  double kkt_error = 0.0;

  /// Per-generator dispatch at time t (affine in t within the interval).
  Vector dispatch_mw(double t) const {
    return gen_p_mw - (t - interval.median()) * gains_mw_per_h;
  }
};

struct PeriodSchedule {
  std::string mode;  // "popf" or "topf"
  std::vector<IntervalSchedule> intervals;
  int total_iterations = 0;

  /// Energy-weighted period cost, $ (sum of median $/h times interval width).
  double period_cost() const {
    double c = 0.0;
    for (const auto& iv : intervals) c += iv.cost_per_h * iv.interval.width();
    return c;
  }
};

struct PopfOptions {
  IpmOptions ipm;
  double mu_init_warm = 0.01;
  bool warm_start = true;
  OpfOptions opf;
  double topf_snapshot_frac = 0.0;  // 0 start, 0.5 median, 1 end
  NewtonOptions newton;
};

namespace detail {

/// Build the NLP starting point: decisions from the warm schedule (or the
/// case file), states from snapshot power flows under those controls.
inline Vector initial_point(const IntervalOpfProblem& prob, const NetworkCase& net,
                            const AdmittanceMatrix& adm, const ForecastSeries& forecast,
                            const std::optional<IntervalSchedule>& warm,
                            const NewtonOptions& newton) {
  const double base = net.base_mva;
  Vector z = Vector::Zero(prob.num_vars());

  const auto& decisions = prob.decision_generators();
  for (std::size_t d = 0; d < decisions.size(); ++d) {
    int g = decisions[d];
    double p0 = warm ? warm->gen_p_mw[g] / base : net.generators[g].pg_mw / base;
    z[prob.p_offset() + static_cast<int>(d)] =
        std::clamp(p0, prob.p_lower(static_cast<int>(d)), prob.p_upper(static_cast<int>(d)));
  }
  const auto& sources = prob.source_bus_indices();
  for (std::size_t k = 0; k < sources.size(); ++k) {
    int i = sources[k];
    double v0 = net.bus_v_set(i);
    if (warm) {
      for (int g : net.generators_at(i)) v0 = warm->gen_v_set[g];
    }
    z[prob.v_offset() + static_cast<int>(k)] =
        std::clamp(v0, net.buses[i].v_min, net.buses[i].v_max);
  }

  // per-snapshot flows under the initial controls
  const int ng = static_cast<int>(net.generators.size());
  Vector gv(ng);
  for (int g = 0; g < ng; ++g) gv[g] = net.generators[g].v_set;
  for (std::size_t k = 0; k < sources.size(); ++k)
    for (int g : net.generators_at(sources[k]))
      gv[g] = z[prob.v_offset() + static_cast<int>(k)];

  for (int s = 0; s < prob.snapshot_count(); ++s) {
    double t = prob.snapshot_time(s);
    Vector gp = prob.generator_power_mw(z, t);
    BusDispatch dispatch = aggregate_dispatch(net, gp, gv);
    VoltageState start = warm ? warm->state_median : flat_start(net, t);
    start.time_h = t;
    try {
      FlowIndex idx(net);
      Vector p_pu, q_pu;
      forecast.sample_pu(t, net, p_pu, q_pu);
      Vector g = RhsBuilder::build(net, idx, p_pu, q_pu, dispatch.p_source_pu, dispatch.v_set);
      auto solved = solve_power_flow(net, adm, g, start, newton);
      prob.set_state(z, s, solved.state);
    } catch (const Error&) {
      prob.set_state(z, s, start);  // the optimizer restores feasibility itself
    }
  }
  return z;
}

inline void set_objective_scale(IntervalOpfProblem& prob, const Vector& z0) {
  prob.set_objective_scale(1.0);
  double gnorm = prob.objective_gradient(z0).lpNorm<Eigen::Infinity>();
  prob.set_objective_scale(100.0 / std::max(100.0, gnorm));
}

inline std::string violation_digest(const IntervalOpfProblem& prob, const Vector& z, int count) {
  Vector ce = prob.eq_residual(z);
  Vector ci = prob.ineq_residual(z);
  std::vector<std::pair<double, std::string>> worst;
  for (int r = 0; r < ce.size(); ++r)
    worst.emplace_back(std::abs(ce[r]), prob.describe_eq_row(r));
  for (int r = 0; r < ci.size(); ++r)
    if (ci[r] < 0.0) worst.emplace_back(-ci[r], prob.describe_ineq_row(r));
  std::sort(worst.begin(), worst.end(), [](auto& a, auto& b) { return a.first > b.first; });
  std::ostringstream out;
  for (int k = 0; k < std::min<int>(count, static_cast<int>(worst.size())); ++k)
    out << "\n  " << worst[k].second << ": " << worst[k].first;
  return out.str();
}

}  // namespace detail

/// Solve one assembled interval problem from the given starting point.
inline IntervalSchedule solve_interval(IntervalOpfProblem& prob, const NetworkCase& net,
                                       const AdmittanceMatrix& adm, const Vector& z0,
                                       const IpmOptions& ipm_options) {
  detail::set_objective_scale(prob, z0);
  InteriorPointSolver solver(ipm_options);
  IpmResult result = solver.solve(prob, z0);
  if (result.status != IpmStatus::kConverged) {
    throw SolveError(
        "interval [" + std::to_string(prob.interval().t_start) + ", " +
            std::to_string(prob.interval().t_end) + "] h: optimizer " +
            (result.status == IpmStatus::kIterationLimit ? "hit the iteration limit"
                                                         : "stalled") +
            " (KKT error " + std::to_string(result.kkt_error) +
            "); most-violated constraints:" + detail::violation_digest(prob, result.z, 5),
        result.iterations);
  }

  const double base = net.base_mva;
  const int ng = static_cast<int>(net.generators.size());
  IntervalSchedule sched;
  sched.interval = prob.interval();
  sched.iterations = result.iterations;
  sched.converged = true;
  sched.kkt_error = result.kkt_error;

  const double tm = sched.interval.median();
  sched.gen_p_mw = prob.generator_power_mw(result.z, tm);
  sched.gains_mw_per_h = prob.gain_pu() * base;
  sched.gen_v_set = Vector::Zero(ng);
  for (int g = 0; g < ng; ++g) sched.gen_v_set[g] = net.generators[g].v_set;
  const auto& sources = prob.source_bus_indices();
  for (std::size_t k = 0; k < sources.size(); ++k)
    for (int g : net.generators_at(sources[k]))
      sched.gen_v_set[g] = result.z[prob.v_offset() + static_cast<int>(k)];

  if (prob.snapshot_count() == 3) {
    sched.state_start = prob.state_of(result.z, 0);
    sched.state_median = prob.state_of(result.z, 1);
    sched.state_end = prob.state_of(result.z, 2);
  } else {
    // single-snapshot solve; the caller simulates the other snapshots
    VoltageState solved = prob.state_of(result.z, 0);
    sched.state_start = solved;
    sched.state_median = solved;
    sched.state_end = solved;
  }

  // cost and energy at the median snapshot
  Vector p_inj, q_inj;
  injections(sched.state_median, adm, p_inj, q_inj);
  Vector p_at_median = sched.gen_p_mw;
  // slack generators: implicit output read from the median state
  double slack_mw = prob.slack_generation_mw(sched.state_median,
                                             prob.snapshot_count() == 3 ? 1 : 0);
  {
    std::vector<int> slack_gens = net.generators_at(net.slack_index());
    double total = 0.0;
    for (int g : slack_gens) total += net.generators[g].p_max_mw;
    for (int g : slack_gens) {
      double share = total > 0.0 ? net.generators[g].p_max_mw / total
                                 : (slack_gens.empty() ? 0.0 : 1.0 / slack_gens.size());
      p_at_median[g] = share * slack_mw;
    }
  }
  sched.gen_p_mw = p_at_median;
  sched.cost_per_h = generation_cost(p_at_median, net.cost_curves);
  sched.energy_mwh = p_inj * base * sched.interval.width();
  return sched;
}

namespace detail {

inline IntervalSchedule simulate_snapshots(IntervalSchedule sched, const NetworkCase& net,
                                           const AdmittanceMatrix& adm,
                                           const ForecastSeries& forecast,
                                           const NewtonOptions& newton) {
  FlowIndex idx(net);
  auto flow_state = [&](double t, const VoltageState& hint) {
    Vector gp = sched.dispatch_mw(t);
    BusDispatch d = aggregate_dispatch(net, gp, sched.gen_v_set);
    Vector p_pu, q_pu;
    forecast.sample_pu(t, net, p_pu, q_pu);
    Vector g = RhsBuilder::build(net, idx, p_pu, q_pu, d.p_source_pu, d.v_set);
    VoltageState x0 = hint;
    x0.time_h = t;
    auto solved = solve_power_flow(net, adm, g, x0, newton);
    return solved.state;
  };
  VoltageState base_state = sched.state_median;
  sched.state_start = flow_state(sched.interval.t_start, base_state);
  sched.state_median = flow_state(sched.interval.median(), base_state);
  sched.state_end = flow_state(sched.interval.t_end, base_state);
  return sched;
}

}  // namespace detail

/// Period model: three-snapshot solves chained by warm starts.
inline PeriodSchedule run_period(const NetworkCase& net, const AdmittanceMatrix& adm,
                                 const ForecastSeries& forecast,
                                 const FrequencyResponseModel& freq,
                                 const std::vector<LinearInterval>& intervals,
                                 const PopfOptions& options) {
  PeriodSchedule out;
  out.mode = "popf";
  std::optional<IntervalSchedule> warm;
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const auto& iv = intervals[k];
    IntervalGains gains = interval_gains(freq, forecast, iv.parent);
    IntervalOpfProblem prob(net, adm, forecast, iv, gains,
                            {iv.t_start, iv.median(), iv.t_end}, 1, {0, 2}, options.opf);
    Vector z0 = detail::initial_point(prob, net, adm, forecast,
                                      options.warm_start ? warm : std::nullopt, options.newton);
    IpmOptions ipm = options.ipm;
    if (options.warm_start && warm) ipm.mu_init = options.mu_init_warm;
    try {
      IntervalSchedule sched = solve_interval(prob, net, adm, z0, ipm);
      out.total_iterations += sched.iterations;
      warm = sched;
      out.intervals.push_back(std::move(sched));
    } catch (const SolveError& e) {
      throw SolveError("interval " + std::to_string(k + 1) + " of " +
                           std::to_string(intervals.size()) + ": " + e.what(),
                       e.iterations);
    }
  }
  return out;
}

/// Baseline: one snapshot per interval, limits only there; the schedule is
/// still propagated over the interval through the gain mapping.
inline PeriodSchedule run_topf(const NetworkCase& net, const AdmittanceMatrix& adm,
                               const ForecastSeries& forecast,
                               const FrequencyResponseModel& freq,
                               const std::vector<LinearInterval>& intervals,
                               const PopfOptions& options) {
  PeriodSchedule out;
  out.mode = "topf";
  std::optional<IntervalSchedule> warm;
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const auto& iv = intervals[k];
    IntervalGains gains = interval_gains(freq, forecast, iv.parent);
    double ts = iv.t_start + options.topf_snapshot_frac * iv.width();
    IntervalOpfProblem prob(net, adm, forecast, iv, gains, {ts}, 0, {0}, options.opf);
    Vector z0 = detail::initial_point(prob, net, adm, forecast,
                                      options.warm_start ? warm : std::nullopt, options.newton);
    IpmOptions ipm = options.ipm;
    if (options.warm_start && warm) ipm.mu_init = options.mu_init_warm;
    try {
      IntervalSchedule sched = solve_interval(prob, net, adm, z0, ipm);
      sched = detail::simulate_snapshots(std::move(sched), net, adm, forecast, options.newton);
      // cost/energy re-evaluated at the simulated median
      double slack_mw = 0.0;
      {
        Vector p_inj, q_inj;
        injections(sched.state_median, adm, p_inj, q_inj);
        Vector pe, qe;
        forecast.sample_pu(iv.median(), net, pe, qe);
        int sl = net.slack_index();
        slack_mw = (p_inj[sl] + pe[sl]) * net.base_mva;
        sched.energy_mwh = p_inj * net.base_mva * iv.width();
      }
      std::vector<int> slack_gens = net.generators_at(net.slack_index());
      double total = 0.0;
      for (int g : slack_gens) total += net.generators[g].p_max_mw;
      for (int g : slack_gens)
        sched.gen_p_mw[g] =
            (total > 0.0 ? net.generators[g].p_max_mw / total : 1.0 / slack_gens.size()) *
            slack_mw;
      sched.cost_per_h = generation_cost(sched.gen_p_mw, net.cost_curves);
      out.total_iterations += sched.iterations;
      warm = sched;
      out.intervals.push_back(std::move(sched));
    } catch (const SolveError& e) {
      throw SolveError("interval " + std::to_string(k + 1) + " of " +
                           std::to_string(intervals.size()) + ": " + e.what(),
                       e.iterations);
    }
  }
  return out;
}

/// Per-bus interval energy per Eq. 29: median net power times interval width.
inline Vector interval_energy(const IntervalSchedule& sched, const NetworkCase& net,
                              const AdmittanceMatrix& adm) {
  Vector p, q;
  injections(sched.state_median, adm, p, q);
  return p * net.base_mva * sched.interval.width();
}

}  // namespace popf
