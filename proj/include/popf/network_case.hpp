#pragma once

// Static grid model: buses, branches, generators, cost curves.
//
// Field values keep the units of the case-file format (MW, MVAr, p.u.
// network parameters); per-unit views are provided where computation
// needs them. Keeping the raw numbers makes serialize/parse round trips
// exact.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "popf/core.hpp"

namespace popf {

enum class BusKind : std::uint8_t {
  kLoad = 1,   // PQ
  kSource = 2, // PV
  kSlack = 3,
};

struct Bus {
  int id = 0;
  BusKind kind = BusKind::kLoad;
  double pd_mw = 0.0;    // static case load, used when no forecast is given
  double qd_mvar = 0.0;
  double gs_mw = 0.0;    // shunt MW injected at V = 1.0 p.u.
  double bs_mvar = 0.0;  // shunt MVAr injected at V = 1.0 p.u.
  double area = 1.0;
  double vm = 1.0;       // stored voltage solution/guess, carried for round trips
  double va_deg = 0.0;
  double base_kv = 0.0;
  double zone = 1.0;
  double v_max = 1.06;   // p.u. magnitude bounds
  double v_min = 0.94;

  bool operator==(const Bus&) const = default;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;   // p.u. series resistance
  double x = 0.0;   // p.u. series reactance
  double b = 0.0;   // p.u. total line charging
  double rate_a_mva = 0.0;  // 0 means unlimited (file convention)
  double rate_b_mva = 0.0;
  double rate_c_mva = 0.0;
  double tap = 0.0;        // 0 means nominal (file convention); effective tap below
  double shift_deg = 0.0;
  int status = 1;

  double effective_tap() const { return tap == 0.0 ? 1.0 : tap; }
  double shift_rad() const { return shift_deg * M_PI / 180.0; }
  /// Active-power flow limit in MW; +inf when the file carries no rating.
  double p_line_max_mw() const {
    return rate_a_mva > 0.0 ? rate_a_mva : std::numeric_limits<double>::infinity();
  }

  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;
  double pg_mw = 0.0;   // scheduled output, used as the baseline dispatch
  double qg_mvar = 0.0;
  double q_max_mvar = 0.0;
  double q_min_mvar = 0.0;
  double v_set = 1.0;   // p.u. scheduled voltage magnitude
  double mbase = 100.0;
  int status = 1;
  double p_max_mw = 0.0;
  double p_min_mw = 0.0;
  double freq_gain = 0.0;  // K_i; 0 means "use the default share policy"

  bool in_service() const { return status > 0; }

  bool operator==(const Generator&) const = default;
};

struct CostCurve {
  double c2 = 0.0;  // $/MW^2 h
  double c1 = 0.0;  // $/MWh
  double c0 = 0.0;  // $/h
  double startup = 0.0;
  double shutdown = 0.0;

  double at(double p_mw) const { return (c2 * p_mw + c1) * p_mw + c0; }
  double marginal(double p_mw) const { return 2.0 * c2 * p_mw + c1; }

  bool operator==(const CostCurve&) const = default;
};

class NetworkCase {
 public:
  double base_mva = 100.0;
  std::string name;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<CostCurve> cost_curves;  // parallel to generators

  bool operator==(const NetworkCase&) const = default;

  int bus_count() const { return static_cast<int>(buses.size()); }

  /// Dense index of a bus id; -1 if unknown.
  int bus_index(int bus_id) const {
    auto it = index_.find(bus_id);
    return it == index_.end() ? -1 : it->second;
  }

  /// Rebuild the id -> index map; call after mutating `buses`.
  void reindex() {
    index_.clear();
    for (int i = 0; i < bus_count(); ++i) index_.emplace(buses[i].id, i);
  }

  int slack_index() const {
    for (int i = 0; i < bus_count(); ++i)
      if (buses[i].kind == BusKind::kSlack) return i;
    return -1;
  }

  /// Indices of in-service generators attached to bus index `bi`.
  std::vector<int> generators_at(int bi) const {
    std::vector<int> out;
    for (int g = 0; g < static_cast<int>(generators.size()); ++g)
      if (generators[g].in_service() && bus_index(generators[g].bus) == bi)
        out.push_back(g);
    return out;
  }

  /// Voltage setpoint for a source bus: the first in-service generator's v_set,
  /// falling back to 1.0 when the bus has none.
  double bus_v_set(int bi) const {
    for (const auto& g : generators)
      if (g.in_service() && bus_index(g.bus) == bi) return g.v_set;
    return 1.0;
  }

  double total_load_mw() const {
    double s = 0.0;
    for (const auto& b : buses) s += b.pd_mw;
    return s;
  }

 private:
  std::unordered_map<int, int> index_;
};

struct ValidationFinding {
  std::string what;
};

/// Check NetworkCase invariants; empty report means valid.
inline std::vector<ValidationFinding> validate(const NetworkCase& net) {
  std::vector<ValidationFinding> findings;
  auto add = [&](std::string msg) { findings.push_back({std::move(msg)}); };

  if (net.base_mva <= 0.0) add("base_mva must be positive");

  int slack_count = 0;
  for (const auto& b : net.buses) {
    if (b.kind == BusKind::kSlack) ++slack_count;
    if (!(b.v_min > 0.0) || b.v_min > b.v_max)
      add("bus " + std::to_string(b.id) + ": voltage bounds must satisfy 0 < v_min <= v_max");
  }
  if (slack_count == 0) add("no slack bus");
  if (slack_count > 1) add("multiple slack buses (" + std::to_string(slack_count) + ")");

  std::unordered_map<int, int> seen;
  for (const auto& b : net.buses)
    if (++seen[b.id] == 2) add("duplicate bus id " + std::to_string(b.id));

  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const auto& br = net.branches[k];
    std::string tag = "branch " + std::to_string(k + 1) + " (" +
                      std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) + ")";
    if (net.bus_index(br.from_bus) < 0) add(tag + ": unknown from bus " + std::to_string(br.from_bus));
    if (net.bus_index(br.to_bus) < 0) add(tag + ": unknown to bus " + std::to_string(br.to_bus));
    if (br.r < 0.0) add(tag + ": negative resistance");
    if (br.r == 0.0 && br.x == 0.0) add(tag + ": zero series impedance");
    if (br.tap < 0.0) add(tag + ": negative tap ratio");
  }

  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto& gen = net.generators[g];
    std::string tag = "generator " + std::to_string(g + 1);
    int bi = net.bus_index(gen.bus);
    if (bi < 0) {
      add(tag + ": unknown bus " + std::to_string(gen.bus));
      continue;
    }
    if (gen.p_min_mw > gen.p_max_mw) add(tag + ": p_min > p_max");
    if (gen.q_min_mvar > gen.q_max_mvar) add(tag + ": q_min > q_max");
    const auto& b = net.buses[bi];
    if (gen.v_set < b.v_min || gen.v_set > b.v_max)
      add(tag + ": v_set " + std::to_string(gen.v_set) + " outside bus " +
          std::to_string(gen.bus) + " voltage bounds");
  }

  if (net.cost_curves.size() != net.generators.size() && !net.cost_curves.empty())
    add("cost table size does not match generator table");
  for (std::size_t g = 0; g < net.cost_curves.size(); ++g)
    if (net.cost_curves[g].c2 < 0.0)
      add("cost curve " + std::to_string(g + 1) + ": negative quadratic coefficient");

  return findings;
}

}  // namespace popf
