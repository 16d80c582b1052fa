#pragma once

// Piecewise-linear equivalent-load trajectories: equally spaced samples of
// load and intermittent-source output per bus, reduced to net values with
// per-interval slopes.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "popf/power_flow.hpp"

namespace popf {

/// Sampled per-bus trajectories on a shared, equally spaced time grid.
struct RawSeries {
  std::vector<double> times_h;            // N+1 points, constant spacing
  std::vector<int> bus_ids;
  // [timepoint][bus] matrices, MW / MVAr
  std::vector<std::vector<double>> p_load, q_load, p_ips, q_ips;

  int point_count() const { return static_cast<int>(times_h.size()); }
  int interval_count() const { return point_count() - 1; }
  double dt_h() const { return times_h.size() > 1 ? times_h[1] - times_h[0] : 0.0; }
};

/// Net trajectories (load minus intermittent output) plus exact slopes.
class ForecastSeries {
 public:
  std::vector<double> times_h;
  std::vector<int> bus_ids;
  std::vector<std::vector<double>> p_e, q_e;          // [timepoint][bus], MW / MVAr
  std::vector<std::vector<double>> slope_p, slope_q;  // [interval][bus], MW/h, MVAr/h

  int point_count() const { return static_cast<int>(times_h.size()); }
  int interval_count() const { return point_count() - 1; }
  double dt_h() const { return times_h[1] - times_h[0]; }
  double start_h() const { return times_h.front(); }
  double end_h() const { return times_h.back(); }
  int bus_series_count() const { return static_cast<int>(bus_ids.size()); }

  /// Forecasting interval containing t; boundary points belong to the
  /// interval on their right, except the horizon end.
  int interval_of(double t) const {
    if (t < start_h() || t > end_h())
      throw Error("time " + std::to_string(t) + " h outside forecast horizon [" +
                  std::to_string(start_h()) + ", " + std::to_string(end_h()) + "]");
    int k = static_cast<int>(std::floor((t - start_h()) / dt_h()));
    return std::clamp(k, 0, interval_count() - 1);
  }

  /// Linear interpolation at t; exact at stored timepoints.
  void sample(double t, Vector& p_mw, Vector& q_mvar) const {
    const int k = interval_of(t);
    const double dt = t - times_h[k];
    const int nb = bus_series_count();
    p_mw.resize(nb);
    q_mvar.resize(nb);
    for (int b = 0; b < nb; ++b) {
      p_mw[b] = p_e[k][b] + dt * slope_p[k][b];
      q_mvar[b] = q_e[k][b] + dt * slope_q[k][b];
    }
  }

  /// Sum of active-power slopes over all buses for interval k, MW/h.
  double slope_sum(int k) const {
    double s = 0.0;
    for (double w : slope_p.at(k)) s += w;
    return s;
  }

  /// Per-bus sampled equivalent load in p.u. on the case's bus ordering.
  void sample_pu(double t, const NetworkCase& net, Vector& p_pu, Vector& q_pu) const {
    Vector p_mw, q_mvar;
    sample(t, p_mw, q_mvar);
    p_pu = Vector::Zero(net.bus_count());
    q_pu = Vector::Zero(net.bus_count());
    for (int b = 0; b < bus_series_count(); ++b) {
      int bi = net.bus_index(bus_ids[b]);
      if (bi < 0) throw Error("forecast names unknown bus " + std::to_string(bus_ids[b]));
      p_pu[bi] += p_mw[b] / net.base_mva;
      q_pu[bi] += q_mvar[b] / net.base_mva;
    }
  }

  /// Restrict/resample onto a new equally spaced grid inside the horizon.
  /// Values are sampled from the piecewise-linear curve, so refinement is
  /// exact; coarsening drops interior kinks.
  ForecastSeries resample(double start_h_, double end_h_, double dt) const {
    if (start_h_ < start_h() - 1e-9 || end_h_ > end_h() + 1e-9 || dt <= 0.0)
      throw Error("resample window outside forecast horizon");
    int n_int = static_cast<int>(std::llround((end_h_ - start_h_) / dt));
    if (n_int < 1 || std::abs(start_h_ + n_int * dt - end_h_) > 1e-9)
      throw Error("resample window is not a whole number of intervals");
    ForecastSeries out;
    out.bus_ids = bus_ids;
    const int nb = bus_series_count();
    out.p_e.assign(n_int + 1, std::vector<double>(nb));
    out.q_e.assign(n_int + 1, std::vector<double>(nb));
    Vector p, q;
    for (int k = 0; k <= n_int; ++k) {
      double t = std::min(start_h_ + k * dt, end_h());
      out.times_h.push_back(start_h_ + k * dt);
      sample(t, p, q);
      for (int b = 0; b < nb; ++b) {
        out.p_e[k][b] = p[b];
        out.q_e[k][b] = q[b];
      }
    }
    out.compute_slopes();
    return out;
  }

  void compute_slopes() {
    const int nb = bus_series_count();
    const int ni = interval_count();
    slope_p.assign(ni, std::vector<double>(nb));
    slope_q.assign(ni, std::vector<double>(nb));
    for (int k = 0; k < ni; ++k) {
      double dt = times_h[k + 1] - times_h[k];
      for (int b = 0; b < nb; ++b) {
        slope_p[k][b] = (p_e[k + 1][b] - p_e[k][b]) / dt;
        slope_q[k][b] = (q_e[k + 1][b] - q_e[k][b]) / dt;
      }
    }
  }
};

/// Net out intermittent sources: P^e = P^l - P^ips, Q^e = Q^l - Q^ips.
inline ForecastSeries equivalent_load(const RawSeries& raw) {
  if (raw.point_count() < 2) throw Error("forecast needs at least two timepoints");
  for (int k = 1; k < raw.point_count(); ++k) {
    double dt = raw.times_h[k] - raw.times_h[k - 1];
    if (dt <= 0.0 || std::abs(dt - raw.dt_h()) > 1e-9 * std::max(1.0, raw.dt_h()))
      throw Error("forecast timepoints must be strictly increasing with constant spacing");
  }
  ForecastSeries out;
  out.times_h = raw.times_h;
  out.bus_ids = raw.bus_ids;
  const int np = raw.point_count();
  const int nb = static_cast<int>(raw.bus_ids.size());
  out.p_e.assign(np, std::vector<double>(nb));
  out.q_e.assign(np, std::vector<double>(nb));
  for (int k = 0; k < np; ++k) {
    if (static_cast<int>(raw.p_load[k].size()) != nb || static_cast<int>(raw.p_ips[k].size()) != nb)
      throw Error("load and intermittent-source tables cover different bus sets");
    for (int b = 0; b < nb; ++b) {
      out.p_e[k][b] = raw.p_load[k][b] - raw.p_ips[k][b];
      out.q_e[k][b] = raw.q_load[k][b] - raw.q_ips[k][b];
    }
  }
  out.compute_slopes();
  return out;
}

/// Targets g(t) from sampled equivalent loads and the given dispatch.
inline Vector build_rhs(double t, const ForecastSeries& series, const NetworkCase& net,
                        const FlowIndex& idx, const BusDispatch& dispatch) {
  for (int i = 0; i < net.bus_count(); ++i) {
    if (net.buses[i].kind == BusKind::kSource && net.generators_at(i).empty())
      throw Error("source bus " + std::to_string(net.buses[i].id) +
                  " has no in-service generator to control");
  }
  Vector p_pu, q_pu;
  series.sample_pu(t, net, p_pu, q_pu);
  return RhsBuilder::build(net, idx, p_pu, q_pu, dispatch.p_source_pu, dispatch.v_set);
}

// ---------------------------------------------------------------------------
// CSV ingestion: time_h, bus_id, p_load_mw, q_load_mvar, p_ips_mw, q_ips_mvar
// Missing (timepoint, bus) pairs default to zero.
// ---------------------------------------------------------------------------

inline RawSeries parse_forecast_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::map<double, std::map<int, std::array<double, 4>>> cells;
  std::vector<int> bus_order;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto pos = line.find('#'); pos != std::string::npos) line = line.substr(0, pos);
    std::string t{detail::trim(line)};
    if (t.empty()) continue;
    for (char& c : t)
      if (c == ',') c = ' ';
    std::istringstream cellstream(t);
    std::vector<std::string> cols;
    std::string cell;
    while (cellstream >> cell) cols.push_back(cell);
    if (line_no == 1 && !cols.empty() && cols[0] == "time_h") continue;  // header
    if (cols.size() < 3)
      throw ParseError("forecast line " + std::to_string(line_no) + ": expected at least 3 columns");
    std::array<double, 4> vals{0, 0, 0, 0};
    double time;
    int bus;
    try {
      time = std::stod(cols[0]);
      bus = std::stoi(cols[1]);
      for (std::size_t c = 2; c < std::min<std::size_t>(cols.size(), 6); ++c)
        vals[c - 2] = std::stod(cols[c]);
    } catch (const std::exception&) {
      throw ParseError("forecast line " + std::to_string(line_no) + ": bad numeric value");
    }
    if (!cells.count(time)) {
      // remember bus order of first appearance for deterministic layout
    }
    if (std::find(bus_order.begin(), bus_order.end(), bus) == bus_order.end())
      bus_order.push_back(bus);
    cells[time][bus] = vals;
  }
  if (cells.size() < 2) throw ParseError("forecast must contain at least two timepoints");

  RawSeries raw;
  std::sort(bus_order.begin(), bus_order.end());
  raw.bus_ids = bus_order;
  for (const auto& [t, _] : cells) raw.times_h.push_back(t);
  for (int k = 1; k < raw.point_count(); ++k) {
    double dt = raw.times_h[k] - raw.times_h[k - 1];
    if (std::abs(dt - raw.dt_h()) > 1e-9 * std::max(1.0, raw.dt_h()))
      throw ParseError("forecast timepoints are not equally spaced (at t=" +
                       std::to_string(raw.times_h[k]) + ")");
  }
  const int nb = static_cast<int>(bus_order.size());
  for (const auto& [t, row] : cells) {
    std::vector<double> pl(nb, 0), ql(nb, 0), pi(nb, 0), qi(nb, 0);
    for (int b = 0; b < nb; ++b) {
      auto it = row.find(bus_order[b]);
      if (it == row.end()) continue;
      pl[b] = it->second[0];
      ql[b] = it->second[1];
      pi[b] = it->second[2];
      qi[b] = it->second[3];
    }
    raw.p_load.push_back(std::move(pl));
    raw.q_load.push_back(std::move(ql));
    raw.p_ips.push_back(std::move(pi));
    raw.q_ips.push_back(std::move(qi));
  }
  return raw;
}

inline RawSeries load_forecast_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open forecast file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_forecast_csv(buf.str());
}

inline std::string serialize_forecast_csv(const RawSeries& raw) {
  std::ostringstream out;
  out << "time_h,bus_id,p_load_mw,q_load_mvar,p_ips_mw,q_ips_mvar\n";
  char buf[256];
  for (int k = 0; k < raw.point_count(); ++k) {
    for (std::size_t b = 0; b < raw.bus_ids.size(); ++b) {
      std::snprintf(buf, sizeof(buf), "%.10g,%d,%.10g,%.10g,%.10g,%.10g\n", raw.times_h[k],
                    raw.bus_ids[b], raw.p_load[k][b], raw.q_load[k][b], raw.p_ips[k][b],
                    raw.q_ips[k][b]);
      out << buf;
    }
  }
  return out.str();
}

}  // namespace popf
