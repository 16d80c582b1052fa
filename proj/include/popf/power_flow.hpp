#pragma once

// Nodal power injections, analytic Jacobian and Newton solves, all in
// rectangular voltage coordinates x = [e_1, f_1, ..., e_n, f_n].
//
// Equation/variable space excludes the slack bus: for every non-slack bus
// there are two equation rows (P and Q for load buses, P and squared
// magnitude for source buses) and two variables (e, f).

#include <cmath>
#include <vector>

#include <Eigen/SparseLU>

#include "popf/admittance.hpp"
#include "popf/network_case.hpp"

namespace popf {

class FactorizationError : public Error {
 public:
  using Error::Error;
};

struct VoltageState {
  Vector x;          // size 2n, [e_1, f_1, ...]
  double time_h = 0.0;

  int bus_count() const { return static_cast<int>(x.size()) / 2; }
  double e(int i) const { return x[2 * i]; }
  double f(int i) const { return x[2 * i + 1]; }
  Complex v(int i) const { return {x[2 * i], x[2 * i + 1]}; }
  double magnitude(int i) const { return std::abs(v(i)); }
};

/// Per-bus voltage magnitudes in p.u.
inline Vector voltage_magnitudes(const VoltageState& state) {
  Vector vm(state.bus_count());
  for (int i = 0; i < state.bus_count(); ++i) vm[i] = state.magnitude(i);
  return vm;
}

/// Row/column bookkeeping for the slack-reduced equation system.
struct FlowIndex {
  int n = 0;
  int slack = -1;
  int dim = 0;                // 2*(n-1)
  std::vector<int> offset;    // per bus: first row/col, -1 for the slack

  explicit FlowIndex(const NetworkCase& net) {
    n = net.bus_count();
    slack = net.slack_index();
    offset.assign(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
      if (i == slack) continue;
      offset[i] = next;
      next += 2;
    }
    dim = next;
  }
};

/// Per-bus injections: P_i + jQ_i = V_i * conj((Y V)_i), in p.u.
inline void injections(const VoltageState& state, const AdmittanceMatrix& adm,
                       Vector& p, Vector& q) {
  const int n = state.bus_count();
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = state.v(i);
  Eigen::VectorXcd s = v.array() * (adm.y * v).array().conjugate();
  p = s.real();
  q = s.imag();
}

/// Targets g for the slack-reduced equations at fixed bus kinds:
/// load bus rows (-P^e, -Q^e); source bus rows (P^c - P^e, V_set^2).
/// All entries p.u.
struct RhsBuilder {
  /// p_c_pu / q_e_pu etc. are per BUS (aggregated over generators).
  static Vector build(const NetworkCase& net, const FlowIndex& idx,
                      const Vector& p_load_pu, const Vector& q_load_pu,
                      const Vector& p_source_pu, const Vector& v_set) {
    Vector g = Vector::Zero(idx.dim);
    for (int i = 0; i < idx.n; ++i) {
      int r = idx.offset[i];
      if (r < 0) continue;
      if (net.buses[i].kind == BusKind::kSource) {
        g[r] = p_source_pu[i] - p_load_pu[i];
        g[r + 1] = v_set[i] * v_set[i];
      } else {
        g[r] = -p_load_pu[i];
        g[r + 1] = -q_load_pu[i];
      }
    }
    return g;
  }
};

/// Mismatch f(x) - g over the slack-reduced equation space.
inline Vector residual(const VoltageState& state, const Vector& g,
                       const AdmittanceMatrix& adm, const NetworkCase& net,
                       const FlowIndex& idx) {
  Vector p, q;
  injections(state, adm, p, q);
  Vector r(idx.dim);
  for (int i = 0; i < idx.n; ++i) {
    int row = idx.offset[i];
    if (row < 0) continue;
    if (net.buses[i].kind == BusKind::kSource) {
      r[row] = p[i] - g[row];
      double e = state.e(i), f = state.f(i);
      r[row + 1] = (e * e + f * f) - g[row + 1];
    } else {
      r[row] = p[i] - g[row];
      r[row + 1] = q[i] - g[row + 1];
    }
  }
  return r;
}

/// Analytic Jacobian of the slack-reduced residual w.r.t. non-slack (e, f).
inline SparseMatrix jacobian(const VoltageState& state, const AdmittanceMatrix& adm,
                             const NetworkCase& net, const FlowIndex& idx) {
  const int n = idx.n;
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = state.v(i);
  Eigen::VectorXcd inj_current = adm.y * v;  // a + jb

  std::vector<Triplet> trip;
  trip.reserve(adm.y.nonZeros() * 4 + 2 * n);
  for (int col = 0; col < adm.y.outerSize(); ++col) {
    for (SparseComplexMatrix::InnerIterator it(adm.y, col); it; ++it) {
      const int i = static_cast<int>(it.row());
      const int j = static_cast<int>(it.col());
      const int row = idx.offset[i];
      const int cvar = idx.offset[j];
      if (row < 0 || cvar < 0) continue;
      const double gij = it.value().real();
      const double bij = it.value().imag();
      const double ei = state.e(i), fi = state.f(i);
      const bool source = net.buses[i].kind == BusKind::kSource;

      // P row
      double dP_de = ei * gij + fi * bij;
      double dP_df = -ei * bij + fi * gij;
      if (i == j) {
        dP_de += inj_current[i].real();
        dP_df += inj_current[i].imag();
      }
      trip.emplace_back(row, cvar, dP_de);
      trip.emplace_back(row, cvar + 1, dP_df);

      if (!source) {
        // Q row
        double dQ_de = fi * gij - ei * bij;
        double dQ_df = -fi * bij - ei * gij;
        if (i == j) {
          dQ_de -= inj_current[i].imag();
          dQ_df += inj_current[i].real();
        }
        trip.emplace_back(row + 1, cvar, dQ_de);
        trip.emplace_back(row + 1, cvar + 1, dQ_df);
      }
    }
  }
  // squared-magnitude rows of source buses
  for (int i = 0; i < n; ++i) {
    int row = idx.offset[i];
    if (row < 0 || net.buses[i].kind != BusKind::kSource) continue;
    trip.emplace_back(row + 1, row, 2.0 * state.e(i));
    trip.emplace_back(row + 1, row + 1, 2.0 * state.f(i));
  }

  SparseMatrix jac(idx.dim, idx.dim);
  jac.setFromTriplets(trip.begin(), trip.end());
  jac.makeCompressed();
  return jac;
}

struct NewtonOptions {
  double tolerance = 1e-8;  // infinity norm of the residual, p.u.
  int max_iterations = 20;
};

struct PowerFlowResult {
  VoltageState state;
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Flat start: e at the voltage setpoint (source/slack buses) or 1.0, f = 0.
inline VoltageState flat_start(const NetworkCase& net, double time_h = 0.0) {
  const int n = net.bus_count();
  VoltageState s;
  s.time_h = time_h;
  s.x = Vector::Zero(2 * n);
  for (int i = 0; i < n; ++i) {
    double mag = 1.0;
    if (net.buses[i].kind != BusKind::kLoad) mag = net.bus_v_set(i);
    s.x[2 * i] = mag;
  }
  return s;
}

/// Newton solve of f(x) = g. Slack entries of x0 are held fixed.
inline PowerFlowResult solve_power_flow(const NetworkCase& net, const AdmittanceMatrix& adm,
                                        const Vector& g, const VoltageState& x0,
                                        const NewtonOptions& opt = {}) {
  const FlowIndex idx(net);
  VoltageState state = x0;
  Eigen::SparseLU<SparseMatrix> lu;

  Vector res = residual(state, g, adm, net, idx);
  double norm = res.lpNorm<Eigen::Infinity>();
  for (int iter = 0; iter <= opt.max_iterations; ++iter) {
    if (!std::isfinite(norm))
      throw DivergenceError("power flow diverged (non-finite residual) at t=" +
                                std::to_string(state.time_h) + " h",
                            norm);
    if (norm <= opt.tolerance) {
      return {state, iter, norm};
    }
    if (iter == opt.max_iterations) break;

    SparseMatrix jac = jacobian(state, adm, net, idx);
    lu.compute(jac);
    if (lu.info() != Eigen::Success)
      throw FactorizationError("singular power flow Jacobian at t=" +
                               std::to_string(state.time_h) + " h");
    Vector step = lu.solve(-res);
    for (int i = 0; i < idx.n; ++i) {
      int c = idx.offset[i];
      if (c < 0) continue;
      state.x[2 * i] += step[c];
      state.x[2 * i + 1] += step[c + 1];
    }
    res = residual(state, g, adm, net, idx);
    norm = res.lpNorm<Eigen::Infinity>();
  }
  throw DivergenceError("power flow did not converge after " +
                            std::to_string(opt.max_iterations) + " iterations (|res|=" +
                            std::to_string(norm) + ") at t=" + std::to_string(state.time_h) + " h",
                        norm);
}

struct BranchFlow {
  double p_from_mw = 0.0;
  double q_from_mvar = 0.0;
  double p_to_mw = 0.0;
  double q_to_mvar = 0.0;
};

/// Pi-model end flows for every in-service branch (zeros for open ones).
inline std::vector<BranchFlow> branch_flows(const VoltageState& state, const NetworkCase& net) {
  std::vector<BranchFlow> flows(net.branches.size());
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const auto& br = net.branches[k];
    if (br.status <= 0) continue;
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex ysh(0.0, br.b / 2.0);
    const double tau = br.effective_tap();
    const Complex tap = tau * std::polar(1.0, br.shift_rad());
    const Complex vf = state.v(net.bus_index(br.from_bus));
    const Complex vt = state.v(net.bus_index(br.to_bus));

    const Complex i_from = (ys + ysh) / (tau * tau) * vf - ys / std::conj(tap) * vt;
    const Complex i_to = (ys + ysh) * vt - ys / tap * vf;
    const Complex s_from = vf * std::conj(i_from) * net.base_mva;
    const Complex s_to = vt * std::conj(i_to) * net.base_mva;
    flows[k] = {s_from.real(), s_from.imag(), s_to.real(), s_to.imag()};
  }
  return flows;
}

/// Aggregate bus-level dispatch (p.u. source power sums and setpoints) from
/// per-generator values; slack-bus generation does not enter the targets.
struct BusDispatch {
  Vector p_source_pu;  // per bus
  Vector v_set;        // per bus, meaningful at source + slack buses
};

inline BusDispatch aggregate_dispatch(const NetworkCase& net, const Vector& gen_p_mw,
                                      const Vector& gen_v_set) {
  const int n = net.bus_count();
  BusDispatch d;
  d.p_source_pu = Vector::Zero(n);
  d.v_set = Vector::Ones(n);
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto& gen = net.generators[g];
    if (!gen.in_service()) continue;
    int bi = net.bus_index(gen.bus);
    d.p_source_pu[bi] += gen_p_mw[static_cast<int>(g)] / net.base_mva;
    d.v_set[bi] = gen_v_set[static_cast<int>(g)];
  }
  return d;
}

/// Targets from the static case data: bus-table loads, scheduled Pg and Vg.
inline Vector case_rhs(const NetworkCase& net, const FlowIndex& idx) {
  const int n = net.bus_count();
  Vector pl(n), ql(n);
  for (int i = 0; i < n; ++i) {
    pl[i] = net.buses[i].pd_mw / net.base_mva;
    ql[i] = net.buses[i].qd_mvar / net.base_mva;
  }
  Vector gp(net.generators.size()), gv(net.generators.size());
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    gp[static_cast<int>(g)] = net.generators[g].pg_mw;
    gv[static_cast<int>(g)] = net.generators[g].v_set;
  }
  BusDispatch d = aggregate_dispatch(net, gp, gv);
  return RhsBuilder::build(net, idx, pl, ql, d.p_source_pu, d.v_set);
}

}  // namespace popf
