#pragma once

// Synthetic scenario builder: drops wind/solar units onto seeded-random load
// buses of a base case and emits a 24 h forecast whose intermittent energy is
// an exact share of the demand energy.

#include <random>
#include <string>
#include <vector>

#include "popf/case_parser.hpp"
#include "popf/forecast.hpp"

namespace popf {

struct ScenarioSpec {
  std::string base_case;       // path to the base case file
  double penetration = 0.30;   // intermittent energy / demand energy
  double wind_share = 0.60;    // wind energy / intermittent energy
  int wind_units = 20;
  int solar_units = 10;
  std::uint64_t seed = 42;
  double horizon_hours = 24.0;
  double dt_hours = 1.0;
  double load_base = 0.8;      // daily load shape: base + swing * sin^2(pi (t-6)/24)
  double load_swing = 0.2;
};

struct Scenario {
  NetworkCase net;       // round trip of the base case
  RawSeries forecast;
  std::vector<int> wind_buses;
  std::vector<int> solar_buses;
};

namespace detail {

/// Deterministic uniform/normal draws; avoids std::*_distribution so output
/// does not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    // Box-Muller
    double u1 = std::max(uniform(), 1e-300);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  std::uint64_t integer(std::uint64_t n) { return gen_() % n; }

 private:
  std::mt19937_64 gen_;
};

inline double trapezoid_energy(const std::vector<double>& v, double dt) {
  double e = 0.0;
  for (std::size_t k = 0; k + 1 < v.size(); ++k) e += 0.5 * (v[k] + v[k + 1]) * dt;
  return e;
}

}  // namespace detail

inline double daily_load_shape(double t_hours, double base, double swing) {
  double s = std::sin(M_PI * (t_hours - 6.0) / 24.0);
  return base + swing * s * s;
}

inline Scenario generate_scenario(const ScenarioSpec& spec) {
  if (spec.penetration < 0.0 || spec.penetration > 1.0)
    throw Error("penetration must lie in [0, 1]");
  if (spec.wind_share < 0.0 || spec.wind_share > 1.0)
    throw Error("wind share must lie in [0, 1]");

  Scenario out;
  out.net = load_case(spec.base_case);
  const auto& net = out.net;

  std::vector<int> load_buses;
  for (const auto& b : net.buses)
    if (b.kind == BusKind::kLoad && b.pd_mw > 0.0) load_buses.push_back(b.id);

  const int units = spec.wind_units + spec.solar_units;
  if (spec.penetration > 0.0 && units > static_cast<int>(load_buses.size()))
    throw Error("penetration unreachable given bus count: need " + std::to_string(units) +
                " distinct load buses, case has " + std::to_string(load_buses.size()));

  detail::Rng rng(spec.seed);
  // seeded draw of distinct placements (partial Fisher-Yates)
  std::vector<int> pool = load_buses;
  for (int u = 0; u < units && spec.penetration > 0.0; ++u) {
    std::size_t pick = u + rng.integer(pool.size() - u);
    std::swap(pool[u], pool[pick]);
    if (u < spec.wind_units)
      out.wind_buses.push_back(pool[u]);
    else
      out.solar_buses.push_back(pool[u]);
  }

  const int np = static_cast<int>(std::llround(spec.horizon_hours / spec.dt_hours)) + 1;
  RawSeries& raw = out.forecast;
  for (int k = 0; k < np; ++k) raw.times_h.push_back(k * spec.dt_hours);

  // bus rows: every load bus plus IPS placements
  for (const auto& b : net.buses)
    if (b.pd_mw != 0.0 || b.qd_mvar != 0.0) raw.bus_ids.push_back(b.id);
  for (int id : out.wind_buses)
    if (std::find(raw.bus_ids.begin(), raw.bus_ids.end(), id) == raw.bus_ids.end())
      raw.bus_ids.push_back(id);
  for (int id : out.solar_buses)
    if (std::find(raw.bus_ids.begin(), raw.bus_ids.end(), id) == raw.bus_ids.end())
      raw.bus_ids.push_back(id);
  std::sort(raw.bus_ids.begin(), raw.bus_ids.end());
  const int nb = static_cast<int>(raw.bus_ids.size());

  raw.p_load.assign(np, std::vector<double>(nb, 0.0));
  raw.q_load.assign(np, std::vector<double>(nb, 0.0));
  raw.p_ips.assign(np, std::vector<double>(nb, 0.0));
  raw.q_ips.assign(np, std::vector<double>(nb, 0.0));

  for (int c = 0; c < nb; ++c) {
    const auto& b = net.buses[net.bus_index(raw.bus_ids[c])];
    for (int k = 0; k < np; ++k) {
      double shape = daily_load_shape(raw.times_h[k], spec.load_base, spec.load_swing);
      raw.p_load[k][c] = b.pd_mw * shape;
      raw.q_load[k][c] = b.qd_mvar * shape;
    }
  }

  if (spec.penetration > 0.0) {
    // per-unit-capacity profiles
    auto column_of = [&](int bus_id) {
      return static_cast<int>(std::lower_bound(raw.bus_ids.begin(), raw.bus_ids.end(), bus_id) -
                              raw.bus_ids.begin());
    };
    std::vector<std::vector<double>> wind(np, std::vector<double>(nb, 0.0));
    std::vector<std::vector<double>> solar(np, std::vector<double>(nb, 0.0));
    for (int id : out.wind_buses) {
      int c = column_of(id);
      double cap = rng.uniform(0.5, 1.5);
      double level = rng.uniform(0.3, 0.7);
      for (int k = 0; k < np; ++k) {
        wind[k][c] += cap * level;
        level = std::clamp(0.5 + 0.85 * (level - 0.5) + 0.10 * rng.normal(), 0.05, 1.0);
      }
    }
    for (int id : out.solar_buses) {
      int c = column_of(id);
      double cap = rng.uniform(0.5, 1.5);
      for (int k = 0; k < np; ++k) {
        double s = std::sin(M_PI * (raw.times_h[k] - 6.0) / 12.0);
        solar[k][c] += cap * std::max(0.0, s);
      }
    }

    double e_load = 0.0, e_wind = 0.0, e_solar = 0.0;
    for (int c = 0; c < nb; ++c) {
      std::vector<double> pl(np), pw(np), ps(np);
      for (int k = 0; k < np; ++k) {
        pl[k] = raw.p_load[k][c];
        pw[k] = wind[k][c];
        ps[k] = solar[k][c];
      }
      e_load += detail::trapezoid_energy(pl, spec.dt_hours);
      e_wind += detail::trapezoid_energy(pw, spec.dt_hours);
      e_solar += detail::trapezoid_energy(ps, spec.dt_hours);
    }
    double target_ips = spec.penetration * e_load;
    double target_wind = spec.wind_share * target_ips;
    double target_solar = target_ips - target_wind;
    if (target_wind > 0.0 && e_wind <= 0.0)
      throw Error("wind energy target unreachable: no wind units placed");
    if (target_solar > 0.0 && e_solar <= 0.0)
      throw Error("solar energy target unreachable: no solar units placed");
    double lam_w = e_wind > 0.0 ? target_wind / e_wind : 0.0;
    double lam_s = e_solar > 0.0 ? target_solar / e_solar : 0.0;
    for (int k = 0; k < np; ++k)
      for (int c = 0; c < nb; ++c)
        raw.p_ips[k][c] = lam_w * wind[k][c] + lam_s * solar[k][c];
  }
  return out;
}

}  // namespace popf
