#pragma once

// Per-interval optimal power flow over three snapshots: generation cost at
// the median snapshot, operating limits at the two end snapshots, power flow
// equalities at all three. Source powers at the endpoints are the affine
// image of the median decision under the interval's frequency-response
// gains; source voltage magnitudes are shared by all snapshots.
//
// The same problem class, restricted to one snapshot with limits at that
// snapshot, is the traditional single-snapshot OPF used as the baseline.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "popf/frequency_response.hpp"
#include "popf/intervals.hpp"
#include "popf/nlp.hpp"

namespace popf {

/// Total quadratic generation cost, $/h, for per-generator outputs in MW.
inline double generation_cost(const Vector& p_mw, const std::vector<CostCurve>& curves) {
  double total = 0.0;
  for (int g = 0; g < p_mw.size(); ++g) total += curves[g].at(p_mw[g]);
  return total;
}

struct OpfOptions {
  bool endpoint_inequalities = true;  // drop to relax the end snapshots entirely
  bool enforce_slack_limits = false;  // apply the slack generators' P/Q bounds
};

/// The assembled NLP for one interval. Variable layout:
///   [ x-block per snapshot (2(n-1) each) | median source powers p.u. | source bus V p.u. ]
class IntervalOpfProblem : public NlpProblem {
 public:
  IntervalOpfProblem(const NetworkCase& net, const AdmittanceMatrix& adm,
                     const ForecastSeries& forecast, const LinearInterval& interval,
                     const IntervalGains& gains, std::vector<double> snapshot_times,
                     int objective_snapshot, std::vector<int> inequality_snapshots,
                     const OpfOptions& options)
      : net_(net),
        adm_(adm),
        idx_(net),
        interval_(interval),
        times_(std::move(snapshot_times)),
        obj_snap_(objective_snapshot),
        ineq_snaps_(std::move(inequality_snapshots)),
        options_(options) {
    y_row_ = adm.y;  // row-major view for per-bus row walks
    const int n = net.bus_count();
    const double base = net.base_mva;
    const int ns = snapshot_count();
    t_anchor_ = times_[obj_snap_];

    slack_ = net.slack_index();
    slack_v_ = net.bus_v_set(slack_);

    // generator partition: decision / pinned / slack-bus
    const int ng = static_cast<int>(net.generators.size());
    gen_kind_.assign(ng, GenKind::kOffline);
    for (int g = 0; g < ng; ++g) {
      const auto& gen = net.generators[g];
      if (!gen.in_service()) continue;
      int bi = net.bus_index(gen.bus);
      if (bi == slack_) {
        gen_kind_[g] = GenKind::kSlackBus;
        slack_gens_.push_back(g);
      } else if (gen.p_min_mw == gen.p_max_mw) {
        gen_kind_[g] = GenKind::kPinned;
      } else {
        gen_kind_[g] = GenKind::kDecision;
        decision_gens_.push_back(g);
      }
    }

    // effective gains: only dispatchable units modulate; pinned units have no
    // headroom and the slack bus balances implicitly
    gain_pu_ = Vector::Zero(ng);
    for (int g : decision_gens_) gain_pu_[g] = gains.k_ik[g] / base;

    // decision boxes, tightened so the affine endpoint images stay feasible
    const double h = interval.width();
    for (int g : decision_gens_) {
      const auto& gen = net.generators[g];
      double reach = 0.0;
      for (int s = 0; s < ns; ++s)
        reach = std::max(reach, std::abs(gain_pu_[g] * (times_[s] - t_anchor_)));
      double lb = gen.p_min_mw / base + reach;
      double ub = gen.p_max_mw / base - reach;
      if (lb > ub)
        throw AssemblyError("generator at bus " + std::to_string(gen.bus) +
                            ": bounds infeasible after gain shift over " + std::to_string(h) +
                            " h interval");
      p_lb_.push_back(lb);
      p_ub_.push_back(ub);
    }

    // source-bus voltage decisions
    for (int i = 0; i < n; ++i)
      if (net.buses[i].kind == BusKind::kSource) {
        source_pos_[i] = static_cast<int>(source_buses_.size());
        source_buses_.push_back(i);
      }

    nx_ = idx_.dim;
    np_ = static_cast<int>(decision_gens_.size());
    nv_ = static_cast<int>(source_buses_.size());
    p_off_ = ns * nx_;
    v_off_ = p_off_ + np_;

    // per-snapshot sampled equivalent loads (p.u.)
    pe_.resize(ns);
    qe_.resize(ns);
    for (int s = 0; s < ns; ++s) forecast.sample_pu(times_[s], net, pe_[s], qe_[s]);

    // per-snapshot per-bus constants of the source P rows:
    //   residual = f_P(x_s) + pe - sum_decision p_g + const, with
    //   const = sum_decision K_g (t_s - t_anchor) - pinned sum
    source_const_.assign(ns, Vector::Zero(n));
    for (int s = 0; s < ns; ++s) {
      for (int g = 0; g < ng; ++g) {
        int bi = net.bus_index(net.generators[g].bus);
        if (gen_kind_[g] == GenKind::kDecision)
          source_const_[s][bi] += gain_pu_[g] * (times_[s] - t_anchor_);
        else if (gen_kind_[g] == GenKind::kPinned)
          source_const_[s][bi] -= net.generators[g].p_min_mw / base;
      }
    }

    // slack cost shares
    if (!slack_gens_.empty()) {
      double total = 0.0;
      for (int g : slack_gens_) total += net.generators[g].p_max_mw;
      for (int g : slack_gens_)
        slack_share_.push_back(total > 0.0 ? net.generators[g].p_max_mw / total
                                           : 1.0 / slack_gens_.size());
    }

    // branch limits (p.u.), finite entries only
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
      const auto& br = net.branches[k];
      if (br.status <= 0) continue;
      double lim = br.p_line_max_mw();
      if (std::isfinite(lim)) limited_branches_.push_back({static_cast<int>(k), lim / base});
    }

    build_inequality_index();
    build_eq_labels();
  }

  // --- layout queries -------------------------------------------------------

  int snapshot_count() const { return static_cast<int>(times_.size()); }
  int num_vars() const override { return snapshot_count() * nx_ + np_ + nv_; }
  int num_eq() const override { return snapshot_count() * nx_; }
  int num_ineq() const override { return static_cast<int>(ineq_rows_.size()); }
  const std::vector<int>& decision_generators() const { return decision_gens_; }
  const std::vector<int>& source_bus_indices() const { return source_buses_; }
  double anchor_time() const { return t_anchor_; }
  const Vector& gain_pu() const { return gain_pu_; }
  double p_lower(int d) const { return p_lb_[d]; }
  double p_upper(int d) const { return p_ub_[d]; }
  const LinearInterval& interval() const { return interval_; }
  double snapshot_time(int s) const { return times_[s]; }
  int objective_snapshot() const { return obj_snap_; }

  /// Expand the z-vector's snapshot block into a full voltage state.
  VoltageState state_of(const Vector& z, int s) const {
    VoltageState st;
    st.time_h = times_[s];
    st.x = Vector::Zero(2 * idx_.n);
    st.x[2 * slack_] = slack_v_;
    for (int i = 0; i < idx_.n; ++i) {
      int c = idx_.offset[i];
      if (c < 0) continue;
      st.x[2 * i] = z[s * nx_ + c];
      st.x[2 * i + 1] = z[s * nx_ + c + 1];
    }
    return st;
  }

  /// Write a voltage state into the z-vector's snapshot block.
  void set_state(Vector& z, int s, const VoltageState& st) const {
    for (int i = 0; i < idx_.n; ++i) {
      int c = idx_.offset[i];
      if (c < 0) continue;
      z[s * nx_ + c] = st.x[2 * i];
      z[s * nx_ + c + 1] = st.x[2 * i + 1];
    }
  }

  int p_offset() const { return p_off_; }
  int v_offset() const { return v_off_; }

  /// Per-generator output in MW at time t implied by the decision vector.
  Vector generator_power_mw(const Vector& z, double t) const {
    const int ng = static_cast<int>(net_.generators.size());
    Vector p = Vector::Zero(ng);
    for (int d = 0; d < np_; ++d) {
      int g = decision_gens_[d];
      p[g] = (z[p_off_ + d] - gain_pu_[g] * (t - t_anchor_)) * net_.base_mva;
    }
    for (int g = 0; g < ng; ++g)
      if (gen_kind_[g] == GenKind::kPinned) p[g] = net_.generators[g].p_min_mw;
    return p;
  }

  /// Slack-bus generation in MW from a solved snapshot state.
  double slack_generation_mw(const VoltageState& st, int s) const {
    Vector p, q;
    injections(st, adm_, p, q);
    return (p[slack_] + pe_[s][slack_]) * net_.base_mva;
  }

  void set_objective_scale(double s) { obj_scale_ = s; }
  double objective_scale() const { return obj_scale_; }

  /// Unscaled generation cost at the objective snapshot, $/h.
  double cost_at_objective(const Vector& z) const { return raw_cost(z); }

  std::string describe_eq_row(int r) const { return eq_labels_[r]; }
  std::string describe_ineq_row(int r) const { return ineq_labels_[r]; }

  // --- NlpProblem interface -------------------------------------------------

  double objective(const Vector& z) const override { return obj_scale_ * raw_cost(z); }

  Vector objective_gradient(const Vector& z) const override {
    Vector grad = Vector::Zero(num_vars());
    const double base = net_.base_mva;
    for (int d = 0; d < np_; ++d) {
      const auto& c = net_.cost_curves[decision_gens_[d]];
      grad[p_off_ + d] = c.marginal(z[p_off_ + d] * base) * base;
    }
    if (!slack_gens_.empty()) {
      VoltageState st = state_of(z, obj_snap_);
      double p_slack = slack_generation_mw(st, obj_snap_);
      double dcost = 0.0;  // d(cost)/d(P_slack_MW)
      for (std::size_t k = 0; k < slack_gens_.size(); ++k)
        dcost += slack_share_[k] *
                 net_.cost_curves[slack_gens_[k]].marginal(slack_share_[k] * p_slack);
      // chain through the slack injection gradient
      add_p_gradient(st, slack_, obj_snap_, dcost * base, grad);
    }
    return grad * obj_scale_;
  }

  Vector eq_residual(const Vector& z) const override {
    Vector r(num_eq());
    for (int s = 0; s < snapshot_count(); ++s) {
      VoltageState st = state_of(z, s);
      Vector p, q;
      injections(st, adm_, p, q);
      for (int i = 0; i < idx_.n; ++i) {
        int row = idx_.offset[i];
        if (row < 0) continue;
        if (net_.buses[i].kind == BusKind::kSource) {
          double sum_p = 0.0;
          for (int d = 0; d < np_; ++d)
            if (net_.bus_index(net_.generators[decision_gens_[d]].bus) == i)
              sum_p += z[p_off_ + d];
          r[s * nx_ + row] = p[i] + pe_[s][i] + source_const_[s][i] - sum_p;
          double vb = z[v_off_ + source_pos_.at(i)];
          double e = st.e(i), f = st.f(i);
          r[s * nx_ + row + 1] = (e * e + f * f) - vb * vb;
        } else {
          r[s * nx_ + row] = p[i] + pe_[s][i];
          r[s * nx_ + row + 1] = q[i] + qe_[s][i];
        }
      }
    }
    return r;
  }

  SparseMatrix eq_jacobian(const Vector& z) const override {
    std::vector<Triplet> trip;
    for (int s = 0; s < snapshot_count(); ++s) {
      VoltageState st = state_of(z, s);
      SparseMatrix jac = jacobian(st, adm_, net_, idx_);
      for (int c = 0; c < jac.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(jac, c); it; ++it)
          trip.emplace_back(s * nx_ + static_cast<int>(it.row()),
                            s * nx_ + static_cast<int>(it.col()), it.value());
      for (int d = 0; d < np_; ++d) {
        int bi = net_.bus_index(net_.generators[decision_gens_[d]].bus);
        trip.emplace_back(s * nx_ + idx_.offset[bi], p_off_ + d, -1.0);
      }
      for (int i : source_buses_)
        trip.emplace_back(s * nx_ + idx_.offset[i] + 1, v_off_ + source_pos_.at(i),
                          -2.0 * z[v_off_ + source_pos_.at(i)]);
    }
    SparseMatrix ae(num_eq(), num_vars());
    ae.setFromTriplets(trip.begin(), trip.end());
    ae.makeCompressed();
    return ae;
  }

  Vector ineq_residual(const Vector& z) const override {
    Vector c(num_ineq());
    std::vector<VoltageState> states;
    std::vector<std::vector<BranchFlow>> flows;
    prepare_snapshots(z, states, flows);
    for (std::size_t r = 0; r < ineq_rows_.size(); ++r)
      c[r] = eval_ineq(ineq_rows_[r], z, states, flows);
    return c;
  }

  SparseMatrix ineq_jacobian(const Vector& z) const override {
    std::vector<VoltageState> states;
    std::vector<std::vector<BranchFlow>> flows;
    prepare_snapshots(z, states, flows);
    std::vector<Triplet> trip;
    for (std::size_t r = 0; r < ineq_rows_.size(); ++r)
      add_ineq_gradient(static_cast<int>(r), ineq_rows_[r], z, states, trip);
    SparseMatrix ai(num_ineq(), num_vars());
    ai.setFromTriplets(trip.begin(), trip.end());
    ai.makeCompressed();
    return ai;
  }

  SparseMatrix lagrangian_hessian(const Vector& z, double sigma, const Vector& y_eq,
                                  const Vector& y_in) const override {
    std::vector<Triplet> trip;
    const double base = net_.base_mva;

    // objective curvature in the decision powers
    for (int d = 0; d < np_; ++d) {
      const auto& c = net_.cost_curves[decision_gens_[d]];
      trip.emplace_back(p_off_ + d, p_off_ + d, sigma * obj_scale_ * 2.0 * c.c2 * base * base);
    }
    // slack cost term: quadratic-in-injection composition
    if (!slack_gens_.empty() && sigma != 0.0) {
      VoltageState st = state_of(z, obj_snap_);
      double p_slack = slack_generation_mw(st, obj_snap_);
      double dcost = 0.0, d2cost = 0.0;
      for (std::size_t k = 0; k < slack_gens_.size(); ++k) {
        const auto& curve = net_.cost_curves[slack_gens_[k]];
        dcost += slack_share_[k] * curve.marginal(slack_share_[k] * p_slack);
        d2cost += slack_share_[k] * slack_share_[k] * 2.0 * curve.c2;
      }
      // first-order part: cost' * base * H(P_slack)
      add_p_hessian(slack_, obj_snap_, sigma * obj_scale_ * dcost * base, trip);
      // second-order part: cost'' * base^2 * grad grad'
      Vector g = Vector::Zero(num_vars());
      add_p_gradient(st, slack_, obj_snap_, 1.0, g);
      double w = sigma * obj_scale_ * d2cost * base * base;
      if (w != 0.0) {
        std::vector<int> nz;
        for (int i = 0; i < g.size(); ++i)
          if (g[i] != 0.0) nz.push_back(i);
        for (int a : nz)
          for (int b : nz) trip.emplace_back(a, b, w * g[a] * g[b]);
      }
    }

    // equality rows (convention: minus multiplier)
    for (int s = 0; s < snapshot_count(); ++s) {
      for (int i = 0; i < idx_.n; ++i) {
        int row = idx_.offset[i];
        if (row < 0) continue;
        double yp = y_eq[s * nx_ + row];
        double yq = y_eq[s * nx_ + row + 1];
        if (yp != 0.0) add_p_hessian(i, s, -yp, trip);
        if (net_.buses[i].kind == BusKind::kSource) {
          if (yq != 0.0) {
            int c = s * nx_ + idx_.offset[i];
            trip.emplace_back(c, c, -yq * 2.0);
            trip.emplace_back(c + 1, c + 1, -yq * 2.0);
            int vc = v_off_ + source_pos_.at(i);
            trip.emplace_back(vc, vc, yq * 2.0);
          }
        } else {
          if (yq != 0.0) add_q_hessian(i, s, -yq, trip);
        }
      }
    }

    // inequality rows
    for (std::size_t r = 0; r < ineq_rows_.size(); ++r) {
      double w = y_in[r];
      if (w == 0.0) continue;
      add_ineq_hessian(ineq_rows_[r], -w, trip);
    }

    SparseMatrix hess(num_vars(), num_vars());
    hess.setFromTriplets(trip.begin(), trip.end());
    hess.makeCompressed();
    return hess;
  }

 private:
  enum class GenKind { kOffline, kDecision, kPinned, kSlackBus };

  enum class RowKind {
    kVoltageLower,   // (e^2+f^2) - vmin^2 at a load bus
    kVoltageUpper,
    kSourceQLower,   // Q injection + Q^e - qmin at a source (or slack) bus
    kSourceQUpper,
    kSlackPLower,
    kSlackPUpper,
    kBranchFromUpper,  // L -/+ P_end
    kBranchFromLower,
    kBranchToUpper,
    kBranchToLower,
    kPBoxLower,
    kPBoxUpper,
    kVBoxLower,
    kVBoxUpper,
  };

  struct IneqRow {
    RowKind kind;
    int snapshot = 0;  // meaningful for state-dependent rows
    int index = 0;     // bus index / branch list index / decision index / source pos
    double bound = 0.0;
  };

  struct LimitedBranch {
    int branch;
    double limit_pu;
  };

  const NetworkCase& net_;
  const AdmittanceMatrix& adm_;
  FlowIndex idx_;
  LinearInterval interval_;
  std::vector<double> times_;
  int obj_snap_;
  std::vector<int> ineq_snaps_;
  OpfOptions options_;
  SparseComplexMatrix y_row_;

  int slack_ = -1;
  double slack_v_ = 1.0;
  double t_anchor_ = 0.0;
  int nx_ = 0, np_ = 0, nv_ = 0, p_off_ = 0, v_off_ = 0;
  std::vector<GenKind> gen_kind_;
  std::vector<int> decision_gens_;
  std::vector<int> slack_gens_;
  std::vector<double> slack_share_;
  std::vector<int> source_buses_;
  std::unordered_map<int, int> source_pos_;  // bus index -> position in v block
  Vector gain_pu_;
  std::vector<double> p_lb_, p_ub_;
  std::vector<Vector> pe_, qe_;
  std::vector<Vector> source_const_;
  std::vector<LimitedBranch> limited_branches_;
  std::vector<IneqRow> ineq_rows_;
  std::vector<std::string> eq_labels_, ineq_labels_;
  double obj_scale_ = 1.0;

  double raw_cost(const Vector& z) const {
    const double base = net_.base_mva;
    double total = 0.0;
    for (int d = 0; d < np_; ++d)
      total += net_.cost_curves[decision_gens_[d]].at(z[p_off_ + d] * base);
    for (std::size_t g = 0; g < gen_kind_.size(); ++g)
      if (gen_kind_[g] == GenKind::kPinned)
        total += net_.cost_curves[g].at(net_.generators[g].p_min_mw);
    if (!slack_gens_.empty()) {
      double p_slack = slack_generation_mw(state_of(z, obj_snap_), obj_snap_);
      for (std::size_t k = 0; k < slack_gens_.size(); ++k)
        total += net_.cost_curves[slack_gens_[k]].at(slack_share_[k] * p_slack);
    }
    return total;
  }

  void build_inequality_index() {
    ineq_rows_.clear();
    ineq_labels_.clear();
    auto label = [&](const std::string& s) { ineq_labels_.push_back(s); };
    for (int s : ineq_snaps_) {
      std::string ts = "t=" + std::to_string(times_[s]) + "h ";
      if (options_.endpoint_inequalities || snapshot_count() == 1) {
        for (int i = 0; i < idx_.n; ++i) {
          if (i == slack_ || net_.buses[i].kind != BusKind::kLoad) continue;
          const auto& b = net_.buses[i];
          ineq_rows_.push_back({RowKind::kVoltageLower, s, i, b.v_min * b.v_min});
          label(ts + "bus " + std::to_string(b.id) + " V lower");
          ineq_rows_.push_back({RowKind::kVoltageUpper, s, i, b.v_max * b.v_max});
          label(ts + "bus " + std::to_string(b.id) + " V upper");
        }
        for (int i = 0; i < idx_.n; ++i) {
          bool slack_bus = (i == slack_);
          if (slack_bus && !options_.enforce_slack_limits) continue;
          if (!slack_bus && net_.buses[i].kind != BusKind::kSource) continue;
          auto gens = net_.generators_at(i);
          if (gens.empty()) continue;
          double qmin = 0.0, qmax = 0.0, pmin = 0.0, pmax = 0.0;
          for (int g : gens) {
            qmin += net_.generators[g].q_min_mvar / net_.base_mva;
            qmax += net_.generators[g].q_max_mvar / net_.base_mva;
            pmin += net_.generators[g].p_min_mw / net_.base_mva;
            pmax += net_.generators[g].p_max_mw / net_.base_mva;
          }
          ineq_rows_.push_back({RowKind::kSourceQLower, s, i, qmin});
          label(ts + "bus " + std::to_string(net_.buses[i].id) + " Q lower");
          ineq_rows_.push_back({RowKind::kSourceQUpper, s, i, qmax});
          label(ts + "bus " + std::to_string(net_.buses[i].id) + " Q upper");
          if (slack_bus) {
            ineq_rows_.push_back({RowKind::kSlackPLower, s, i, pmin});
            label(ts + "slack P lower");
            ineq_rows_.push_back({RowKind::kSlackPUpper, s, i, pmax});
            label(ts + "slack P upper");
          }
        }
        for (std::size_t k = 0; k < limited_branches_.size(); ++k) {
          const auto& lb = limited_branches_[k];
          const auto& br = net_.branches[lb.branch];
          std::string name = "branch " + std::to_string(br.from_bus) + "-" +
                             std::to_string(br.to_bus);
          ineq_rows_.push_back({RowKind::kBranchFromUpper, s, static_cast<int>(k), lb.limit_pu});
          label(ts + name + " from-end upper");
          ineq_rows_.push_back({RowKind::kBranchFromLower, s, static_cast<int>(k), lb.limit_pu});
          label(ts + name + " from-end lower");
          ineq_rows_.push_back({RowKind::kBranchToUpper, s, static_cast<int>(k), lb.limit_pu});
          label(ts + name + " to-end upper");
          ineq_rows_.push_back({RowKind::kBranchToLower, s, static_cast<int>(k), lb.limit_pu});
          label(ts + name + " to-end lower");
        }
      }
    }
    // decision boxes are snapshot-independent
    for (int d = 0; d < np_; ++d) {
      int bus = net_.generators[decision_gens_[d]].bus;
      ineq_rows_.push_back({RowKind::kPBoxLower, 0, d, p_lb_[d]});
      label("gen at bus " + std::to_string(bus) + " P lower");
      ineq_rows_.push_back({RowKind::kPBoxUpper, 0, d, p_ub_[d]});
      label("gen at bus " + std::to_string(bus) + " P upper");
    }
    for (int i : source_buses_) {
      const auto& b = net_.buses[i];
      ineq_rows_.push_back({RowKind::kVBoxLower, 0, source_pos_[i], b.v_min});
      label("bus " + std::to_string(b.id) + " V setpoint lower");
      ineq_rows_.push_back({RowKind::kVBoxUpper, 0, source_pos_[i], b.v_max});
      label("bus " + std::to_string(b.id) + " V setpoint upper");
    }
  }

  void build_eq_labels() {
    eq_labels_.assign(num_eq(), "");
    for (int s = 0; s < snapshot_count(); ++s)
      for (int i = 0; i < idx_.n; ++i) {
        int row = idx_.offset[i];
        if (row < 0) continue;
        std::string ts = "t=" + std::to_string(times_[s]) + "h bus " +
                         std::to_string(net_.buses[i].id);
        eq_labels_[s * nx_ + row] = ts + " P balance";
        eq_labels_[s * nx_ + row + 1] =
            ts + (net_.buses[i].kind == BusKind::kSource ? " V magnitude" : " Q balance");
      }
  }

  void prepare_snapshots(const Vector& z, std::vector<VoltageState>& states,
                         std::vector<std::vector<BranchFlow>>& flows) const {
    states.resize(snapshot_count());
    flows.resize(snapshot_count());
    for (int s : ineq_snaps_) {
      states[s] = state_of(z, s);
      if (!limited_branches_.empty()) flows[s] = branch_flows(states[s], net_);
    }
  }

  double eval_ineq(const IneqRow& row, const Vector& z, const std::vector<VoltageState>& states,
                   const std::vector<std::vector<BranchFlow>>& flows) const {
    switch (row.kind) {
      case RowKind::kVoltageLower: {
        const auto& st = states[row.snapshot];
        double m = st.e(row.index) * st.e(row.index) + st.f(row.index) * st.f(row.index);
        return m - row.bound;
      }
      case RowKind::kVoltageUpper: {
        const auto& st = states[row.snapshot];
        double m = st.e(row.index) * st.e(row.index) + st.f(row.index) * st.f(row.index);
        return row.bound - m;
      }
      case RowKind::kSourceQLower:
      case RowKind::kSourceQUpper: {
        double qc = source_q_pu(states[row.snapshot], row.snapshot, row.index);
        return row.kind == RowKind::kSourceQLower ? qc - row.bound : row.bound - qc;
      }
      case RowKind::kSlackPLower:
      case RowKind::kSlackPUpper: {
        double pc = source_p_pu(states[row.snapshot], row.snapshot, row.index);
        return row.kind == RowKind::kSlackPLower ? pc - row.bound : row.bound - pc;
      }
      case RowKind::kBranchFromUpper:
      case RowKind::kBranchFromLower: {
        double p = flows[row.snapshot][limited_branches_[row.index].branch].p_from_mw /
                   net_.base_mva;
        return row.kind == RowKind::kBranchFromUpper ? row.bound - p : row.bound + p;
      }
      case RowKind::kBranchToUpper:
      case RowKind::kBranchToLower: {
        double p = flows[row.snapshot][limited_branches_[row.index].branch].p_to_mw /
                   net_.base_mva;
        return row.kind == RowKind::kBranchToUpper ? row.bound - p : row.bound + p;
      }
      case RowKind::kPBoxLower:
        return z[p_off_ + row.index] - row.bound;
      case RowKind::kPBoxUpper:
        return row.bound - z[p_off_ + row.index];
      case RowKind::kVBoxLower:
        return z[v_off_ + row.index] - row.bound;
      case RowKind::kVBoxUpper:
        return row.bound - z[v_off_ + row.index];
    }
    return 0.0;
  }

  /// Reactive generation at a source bus: Q injection plus equivalent load.
  double source_q_pu(const VoltageState& st, int s, int i) const {
    Vector p, q;
    injections(st, adm_, p, q);
    return q[i] + qe_[s][i];
  }

  double source_p_pu(const VoltageState& st, int s, int i) const {
    Vector p, q;
    injections(st, adm_, p, q);
    return p[i] + pe_[s][i];
  }

  // gradient of the P injection of bus i at snapshot s, scaled, into grad
  void add_p_gradient(const VoltageState& st, int i, int s, double scale, Vector& grad) const {
    Complex inj = y_rowvec_dot(i, st);
    for (SparseComplexMatrix::InnerIterator it(y_row_, i); it; ++it) {
      int j = static_cast<int>(it.index());
      int c = idx_.offset[j];
      if (c < 0) continue;
      double gij = it.value().real(), bij = it.value().imag();
      double de = st.e(i) * gij + st.f(i) * bij;
      double df = -st.e(i) * bij + st.f(i) * gij;
      if (i == j) {
        de += inj.real();
        df += inj.imag();
      }
      grad[s * nx_ + c] += scale * de;
      grad[s * nx_ + c + 1] += scale * df;
    }
  }

  void add_q_gradient(const VoltageState& st, int i, int s, double scale, Vector& grad) const {
    Complex inj = y_rowvec_dot(i, st);
    for (SparseComplexMatrix::InnerIterator it(y_row_, i); it; ++it) {
      int j = static_cast<int>(it.index());
      int c = idx_.offset[j];
      if (c < 0) continue;
      double gij = it.value().real(), bij = it.value().imag();
      double de = st.f(i) * gij - st.e(i) * bij;
      double df = -st.f(i) * bij - st.e(i) * gij;
      if (i == j) {
        de -= inj.imag();
        df += inj.real();
      }
      grad[s * nx_ + c] += scale * de;
      grad[s * nx_ + c + 1] += scale * df;
    }
  }

  Complex y_rowvec_dot(int i, const VoltageState& st) const {
    Complex acc = 0.0;
    for (SparseComplexMatrix::InnerIterator it(y_row_, i); it; ++it)
      acc += it.value() * st.v(static_cast<int>(it.index()));
    return acc;
  }

  // constant Hessian of the P injection of bus i, weighted, into triplets
  void add_p_hessian(int i, int s, double w, std::vector<Triplet>& trip) const {
    int ci = idx_.offset[i];
    for (SparseComplexMatrix::InnerIterator it(y_row_, i); it; ++it) {
      int j = static_cast<int>(it.index());
      int cj = idx_.offset[j];
      double gij = it.value().real(), bij = it.value().imag();
      if (j == i) {
        if (ci < 0) continue;
        int c = s * nx_ + ci;
        trip.emplace_back(c, c, w * 2.0 * gij);
        trip.emplace_back(c + 1, c + 1, w * 2.0 * gij);
        continue;
      }
      if (ci < 0 || cj < 0) continue;
      int a = s * nx_ + ci, b = s * nx_ + cj;
      trip.emplace_back(a, b, w * gij);
      trip.emplace_back(b, a, w * gij);
      trip.emplace_back(a + 1, b + 1, w * gij);
      trip.emplace_back(b + 1, a + 1, w * gij);
      trip.emplace_back(a, b + 1, -w * bij);
      trip.emplace_back(b + 1, a, -w * bij);
      trip.emplace_back(a + 1, b, w * bij);
      trip.emplace_back(b, a + 1, w * bij);
    }
  }

  void add_q_hessian(int i, int s, double w, std::vector<Triplet>& trip) const {
    int ci = idx_.offset[i];
    for (SparseComplexMatrix::InnerIterator it(y_row_, i); it; ++it) {
      int j = static_cast<int>(it.index());
      int cj = idx_.offset[j];
      double gij = it.value().real(), bij = it.value().imag();
      if (j == i) {
        if (ci < 0) continue;
        int c = s * nx_ + ci;
        trip.emplace_back(c, c, -w * 2.0 * bij);
        trip.emplace_back(c + 1, c + 1, -w * 2.0 * bij);
        continue;
      }
      if (ci < 0 || cj < 0) continue;
      int a = s * nx_ + ci, b = s * nx_ + cj;
      trip.emplace_back(a, b, -w * bij);
      trip.emplace_back(b, a, -w * bij);
      trip.emplace_back(a + 1, b + 1, -w * bij);
      trip.emplace_back(b + 1, a + 1, -w * bij);
      trip.emplace_back(a, b + 1, -w * gij);
      trip.emplace_back(b + 1, a, -w * gij);
      trip.emplace_back(a + 1, b, w * gij);
      trip.emplace_back(b, a + 1, w * gij);
    }
  }

  struct BranchEndCoeff {
    int fi, ti;           // bus indices of this end's own/other side
    double g_self, g_mut, b_mut;
  };

  BranchEndCoeff branch_coeff(int k, bool from_end) const {
    const auto& br = net_.branches[k];
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex ysh(0.0, br.b / 2.0);
    const double tau = br.effective_tap();
    const Complex tap = tau * std::polar(1.0, br.shift_rad());
    BranchEndCoeff c;
    if (from_end) {
      Complex yff = (ys + ysh) / (tau * tau);
      Complex yft = -ys / std::conj(tap);
      c.fi = net_.bus_index(br.from_bus);
      c.ti = net_.bus_index(br.to_bus);
      c.g_self = yff.real();
      c.g_mut = yft.real();
      c.b_mut = yft.imag();
    } else {
      Complex ytt = ys + ysh;
      Complex ytf = -ys / tap;
      c.fi = net_.bus_index(br.to_bus);
      c.ti = net_.bus_index(br.from_bus);
      c.g_self = ytt.real();
      c.g_mut = ytf.real();
      c.b_mut = ytf.imag();
    }
    return c;
  }

  // gradient of the active end flow (p.u.), scaled, into triplets at row r
  void add_branch_gradient(int r, int k, bool from_end, int s, double scale,
                           const VoltageState& st, std::vector<Triplet>& trip) const {
    auto c = branch_coeff(k, from_end);
    double ef = st.e(c.fi), ff = st.f(c.fi), et = st.e(c.ti), ft = st.f(c.ti);
    int cf = idx_.offset[c.fi], ct = idx_.offset[c.ti];
    if (cf >= 0) {
      trip.emplace_back(r, s * nx_ + cf, scale * (2.0 * c.g_self * ef + c.g_mut * et - c.b_mut * ft));
      trip.emplace_back(r, s * nx_ + cf + 1,
                        scale * (2.0 * c.g_self * ff + c.g_mut * ft + c.b_mut * et));
    }
    if (ct >= 0) {
      trip.emplace_back(r, s * nx_ + ct, scale * (c.g_mut * ef + c.b_mut * ff));
      trip.emplace_back(r, s * nx_ + ct + 1, scale * (c.g_mut * ff - c.b_mut * ef));
    }
  }

  void add_branch_hessian(int k, bool from_end, int s, double w,
                          std::vector<Triplet>& trip) const {
    auto c = branch_coeff(k, from_end);
    int cf = idx_.offset[c.fi], ct = idx_.offset[c.ti];
    if (cf >= 0) {
      int a = s * nx_ + cf;
      trip.emplace_back(a, a, w * 2.0 * c.g_self);
      trip.emplace_back(a + 1, a + 1, w * 2.0 * c.g_self);
    }
    if (cf >= 0 && ct >= 0) {
      int a = s * nx_ + cf, b = s * nx_ + ct;
      trip.emplace_back(a, b, w * c.g_mut);
      trip.emplace_back(b, a, w * c.g_mut);
      trip.emplace_back(a + 1, b + 1, w * c.g_mut);
      trip.emplace_back(b + 1, a + 1, w * c.g_mut);
      trip.emplace_back(a, b + 1, -w * c.b_mut);
      trip.emplace_back(b + 1, a, -w * c.b_mut);
      trip.emplace_back(a + 1, b, w * c.b_mut);
      trip.emplace_back(b, a + 1, w * c.b_mut);
    }
  }

  void add_ineq_gradient(int r, const IneqRow& row, const Vector& z,
                         const std::vector<VoltageState>& states,
                         std::vector<Triplet>& trip) const {
    switch (row.kind) {
      case RowKind::kVoltageLower:
      case RowKind::kVoltageUpper: {
        double sgn = row.kind == RowKind::kVoltageLower ? 1.0 : -1.0;
        const auto& st = states[row.snapshot];
        int c = row.snapshot * nx_ + idx_.offset[row.index];
        trip.emplace_back(r, c, sgn * 2.0 * st.e(row.index));
        trip.emplace_back(r, c + 1, sgn * 2.0 * st.f(row.index));
        break;
      }
      case RowKind::kSourceQLower:
      case RowKind::kSourceQUpper: {
        double sgn = row.kind == RowKind::kSourceQLower ? 1.0 : -1.0;
        Vector g = Vector::Zero(num_vars());
        add_q_gradient(states[row.snapshot], row.index, row.snapshot, sgn, g);
        for (int c = 0; c < g.size(); ++c)
          if (g[c] != 0.0) trip.emplace_back(r, c, g[c]);
        break;
      }
      case RowKind::kSlackPLower:
      case RowKind::kSlackPUpper: {
        double sgn = row.kind == RowKind::kSlackPLower ? 1.0 : -1.0;
        Vector g = Vector::Zero(num_vars());
        add_p_gradient(states[row.snapshot], row.index, row.snapshot, sgn, g);
        for (int c = 0; c < g.size(); ++c)
          if (g[c] != 0.0) trip.emplace_back(r, c, g[c]);
        break;
      }
      case RowKind::kBranchFromUpper:
      case RowKind::kBranchFromLower: {
        double sgn = row.kind == RowKind::kBranchFromUpper ? -1.0 : 1.0;
        add_branch_gradient(r, limited_branches_[row.index].branch, true, row.snapshot, sgn,
                            states[row.snapshot], trip);
        break;
      }
      case RowKind::kBranchToUpper:
      case RowKind::kBranchToLower: {
        double sgn = row.kind == RowKind::kBranchToUpper ? -1.0 : 1.0;
        add_branch_gradient(r, limited_branches_[row.index].branch, false, row.snapshot, sgn,
                            states[row.snapshot], trip);
        break;
      }
      case RowKind::kPBoxLower:
        trip.emplace_back(r, p_off_ + row.index, 1.0);
        break;
      case RowKind::kPBoxUpper:
        trip.emplace_back(r, p_off_ + row.index, -1.0);
        break;
      case RowKind::kVBoxLower:
        trip.emplace_back(r, v_off_ + row.index, 1.0);
        break;
      case RowKind::kVBoxUpper:
        trip.emplace_back(r, v_off_ + row.index, -1.0);
        break;
    }
  }

  void add_ineq_hessian(const IneqRow& row, double w, std::vector<Triplet>& trip) const {
    switch (row.kind) {
      case RowKind::kVoltageLower:
      case RowKind::kVoltageUpper: {
        double sgn = row.kind == RowKind::kVoltageLower ? 1.0 : -1.0;
        int c = row.snapshot * nx_ + idx_.offset[row.index];
        trip.emplace_back(c, c, w * sgn * 2.0);
        trip.emplace_back(c + 1, c + 1, w * sgn * 2.0);
        break;
      }
      case RowKind::kSourceQLower:
      case RowKind::kSourceQUpper:
        add_q_hessian(row.index, row.snapshot,
                      w * (row.kind == RowKind::kSourceQLower ? 1.0 : -1.0), trip);
        break;
      case RowKind::kSlackPLower:
      case RowKind::kSlackPUpper:
        add_p_hessian(row.index, row.snapshot,
                      w * (row.kind == RowKind::kSlackPLower ? 1.0 : -1.0), trip);
        break;
      case RowKind::kBranchFromUpper:
      case RowKind::kBranchFromLower:
        add_branch_hessian(limited_branches_[row.index].branch, true, row.snapshot,
                           w * (row.kind == RowKind::kBranchFromUpper ? -1.0 : 1.0), trip);
        break;
      case RowKind::kBranchToUpper:
      case RowKind::kBranchToLower:
        add_branch_hessian(limited_branches_[row.index].branch, false, row.snapshot,
                           w * (row.kind == RowKind::kBranchToUpper ? -1.0 : 1.0), trip);
        break;
      default:
        break;  // box rows are linear
    }
  }
};

}  // namespace popf
