#pragma once

// MATPOWER-format subset: mpc.baseMVA, mpc.bus, mpc.gen, mpc.branch,
// mpc.gencost, optional mpc.freqgain. Unknown trailing columns are ignored.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "popf/network_case.hpp"

namespace popf {

namespace detail {

struct NumericRow {
  std::vector<double> values;
  int line = 0;
};

struct CaseTables {
  std::optional<double> base_mva;
  std::string name;
  std::unordered_map<std::string, std::vector<NumericRow>> tables;
};

inline CaseTables tokenize_case(const std::string& text) {
  CaseTables out;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::string open_table;  // table currently being filled
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line{raw};
    if (auto pos = line.find('%'); pos != std::string_view::npos) line = line.substr(0, pos);
    line = trim(line);
    if (line.empty()) continue;

    if (open_table.empty()) {
      if (line.starts_with("function")) {
        if (auto eq = line.rfind('='); eq != std::string_view::npos)
          out.name = std::string(trim(line.substr(eq + 1)));
        continue;
      }
      if (!line.starts_with("mpc.")) continue;
      auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ParseError("line " + std::to_string(line_no) + ": expected '=' after mpc field");
      std::string key{trim(line.substr(4, eq - 4))};
      std::string_view rhs = trim(line.substr(eq + 1));
      if (key == "baseMVA") {
        std::string v{rhs};
        if (!v.empty() && v.back() == ';') v.pop_back();
        try {
          out.base_mva = std::stod(v);
        } catch (const std::exception&) {
          throw ParseError("line " + std::to_string(line_no) + ": bad baseMVA value '" + v + "'");
        }
        continue;
      }
      if (rhs.starts_with("[")) {
        open_table = key;
        out.tables[key];  // register even if empty
        rhs = trim(rhs.substr(1));
        if (rhs.empty()) continue;
        line = rhs;  // fall through: data may start on the same line
      } else {
        continue;  // scalar field we do not use
      }
    }

    // inside a table: rows of numbers, terminated by "];"
    bool closes = false;
    if (auto pos = line.find(']'); pos != std::string_view::npos) {
      closes = true;
      line = trim(line.substr(0, pos));
    }
    if (!line.empty()) {
      NumericRow row;
      row.line = line_no;
      std::string scratch{line};
      for (char& c : scratch)
        if (c == ';' || c == ',') c = ' ';
      std::istringstream cells(scratch);
      std::string cell;
      while (cells >> cell) {
        try {
          row.values.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw ParseError("line " + std::to_string(line_no) + " in table '" + open_table +
                           "': not a number: '" + cell + "'");
        }
      }
      if (!row.values.empty()) out.tables[open_table].push_back(std::move(row));
    }
    if (closes) open_table.clear();
  }
  if (!open_table.empty())
    throw ParseError("table '" + open_table + "' is never closed with ']'");
  return out;
}

inline void require_arity(const NumericRow& row, std::size_t need, const char* table) {
  if (row.values.size() < need)
    throw ParseError("line " + std::to_string(row.line) + ": " + table + " row has " +
                     std::to_string(row.values.size()) + " columns, expected at least " +
                     std::to_string(need));
}

}  // namespace detail

/// Parse MATPOWER-subset case text into a validated NetworkCase.
inline NetworkCase parse_case(const std::string& text) {
  auto data = detail::tokenize_case(text);
  if (!data.base_mva) throw ParseError("baseMVA absent");
  auto table = [&](const char* name) -> const std::vector<detail::NumericRow>& {
    auto it = data.tables.find(name);
    if (it == data.tables.end() || it->second.empty())
      throw ParseError(std::string(name) + " table absent");
    return it->second;
  };

  NetworkCase net;
  net.base_mva = *data.base_mva;
  net.name = data.name;
  if (net.base_mva <= 0.0) throw ParseError("baseMVA must be positive");

  for (const auto& row : table("bus")) {
    detail::require_arity(row, 13, "bus");
    const auto& v = row.values;
    Bus b;
    b.id = static_cast<int>(v[0]);
    int kind = static_cast<int>(v[1]);
    if (kind < 1 || kind > 3)
      throw ParseError("line " + std::to_string(row.line) + ": bus " + std::to_string(b.id) +
                       " has unknown type " + std::to_string(kind));
    b.kind = static_cast<BusKind>(kind);
    b.pd_mw = v[2];
    b.qd_mvar = v[3];
    b.gs_mw = v[4];
    b.bs_mvar = v[5];
    b.area = v[6];
    b.vm = v[7];
    b.va_deg = v[8];
    b.base_kv = v[9];
    b.zone = v[10];
    b.v_max = v[11];
    b.v_min = v[12];
    net.buses.push_back(b);
  }
  net.reindex();

  int slack_count = 0;
  for (const auto& b : net.buses)
    if (b.kind == BusKind::kSlack) ++slack_count;
  if (slack_count != 1)
    throw ParseError("case must have exactly one slack bus, found " +
                     std::to_string(slack_count));

  for (const auto& row : table("gen")) {
    detail::require_arity(row, 10, "gen");
    const auto& v = row.values;
    Generator g;
    g.bus = static_cast<int>(v[0]);
    g.pg_mw = v[1];
    g.qg_mvar = v[2];
    g.q_max_mvar = v[3];
    g.q_min_mvar = v[4];
    g.v_set = v[5];
    g.mbase = v[6];
    g.status = static_cast<int>(v[7]);
    g.p_max_mw = v[8];
    g.p_min_mw = v[9];
    if (net.bus_index(g.bus) < 0)
      throw ParseError("line " + std::to_string(row.line) + ": generator references unknown bus " +
                       std::to_string(g.bus));
    net.generators.push_back(g);
  }

  for (const auto& row : table("branch")) {
    detail::require_arity(row, 11, "branch");
    const auto& v = row.values;
    Branch br;
    br.from_bus = static_cast<int>(v[0]);
    br.to_bus = static_cast<int>(v[1]);
    br.r = v[2];
    br.x = v[3];
    br.b = v[4];
    br.rate_a_mva = v[5];
    br.rate_b_mva = v[6];
    br.rate_c_mva = v[7];
    br.tap = v[8];
    br.shift_deg = v[9];
    br.status = static_cast<int>(v[10]);
    if (net.bus_index(br.from_bus) < 0)
      throw ParseError("line " + std::to_string(row.line) + ": branch references unknown bus " +
                       std::to_string(br.from_bus));
    if (net.bus_index(br.to_bus) < 0)
      throw ParseError("line " + std::to_string(row.line) + ": branch references unknown bus " +
                       std::to_string(br.to_bus));
    if (br.r == 0.0 && br.x == 0.0)
      throw ParseError("line " + std::to_string(row.line) + ": branch " +
                       std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                       " has zero series impedance");
    net.branches.push_back(br);
  }

  for (const auto& row : table("gencost")) {
    detail::require_arity(row, 4, "gencost");
    const auto& v = row.values;
    if (static_cast<int>(v[0]) != 2)
      throw ParseError("line " + std::to_string(row.line) +
                       ": only polynomial gencost (model 2) is supported");
    int n = static_cast<int>(v[3]);
    if (n != 3 || row.values.size() < 7)
      throw ParseError("line " + std::to_string(row.line) +
                       ": gencost must carry 3 polynomial coefficients");
    CostCurve c;
    c.startup = v[1];
    c.shutdown = v[2];
    c.c2 = v[4];
    c.c1 = v[5];
    c.c0 = v[6];
    net.cost_curves.push_back(c);
  }
  if (net.cost_curves.size() != net.generators.size())
    throw ParseError("gencost has " + std::to_string(net.cost_curves.size()) +
                     " rows for " + std::to_string(net.generators.size()) + " generators");

  // optional frequency-gain extension: rows of (gen index 1-based, K_i)
  if (auto it = data.tables.find("freqgain"); it != data.tables.end()) {
    for (const auto& row : it->second) {
      detail::require_arity(row, 2, "freqgain");
      int g = static_cast<int>(row.values[0]);
      if (g < 1 || g > static_cast<int>(net.generators.size()))
        throw ParseError("line " + std::to_string(row.line) + ": freqgain row names generator " +
                         std::to_string(g) + " of " + std::to_string(net.generators.size()));
      net.generators[g - 1].freq_gain = row.values[1];
    }
  }

  return net;
}

/// Read and parse a case file from disk.
inline NetworkCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str());
}

namespace detail {
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = std::stod(buf);
  if (back == v) {
    // prefer the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
      char s[32];
      std::snprintf(s, sizeof(s), "%.*g", prec, v);
      if (std::stod(s) == v) return s;
    }
  }
  return buf;
}
}  // namespace detail

/// Emit a NetworkCase in the same MATPOWER-subset text format.
inline std::string serialize_case(const NetworkCase& net) {
  using detail::fmt;
  std::ostringstream out;
  out << "function mpc = " << (net.name.empty() ? "case_unnamed" : net.name) << "\n\n";
  out << "mpc.baseMVA = " << fmt(net.base_mva) << ";\n\n";
  out << "mpc.bus = [\n";
  for (const auto& b : net.buses) {
    out << "\t" << b.id << "\t" << static_cast<int>(b.kind) << "\t" << fmt(b.pd_mw) << "\t"
        << fmt(b.qd_mvar) << "\t" << fmt(b.gs_mw) << "\t" << fmt(b.bs_mvar) << "\t" << fmt(b.area)
        << "\t" << fmt(b.vm) << "\t" << fmt(b.va_deg) << "\t" << fmt(b.base_kv) << "\t"
        << fmt(b.zone) << "\t" << fmt(b.v_max) << "\t" << fmt(b.v_min) << ";\n";
  }
  out << "];\n\nmpc.gen = [\n";
  for (const auto& g : net.generators) {
    out << "\t" << g.bus << "\t" << fmt(g.pg_mw) << "\t" << fmt(g.qg_mvar) << "\t"
        << fmt(g.q_max_mvar) << "\t" << fmt(g.q_min_mvar) << "\t" << fmt(g.v_set) << "\t"
        << fmt(g.mbase) << "\t" << g.status << "\t" << fmt(g.p_max_mw) << "\t" << fmt(g.p_min_mw)
        << ";\n";
  }
  out << "];\n\nmpc.branch = [\n";
  for (const auto& br : net.branches) {
    out << "\t" << br.from_bus << "\t" << br.to_bus << "\t" << fmt(br.r) << "\t" << fmt(br.x)
        << "\t" << fmt(br.b) << "\t" << fmt(br.rate_a_mva) << "\t" << fmt(br.rate_b_mva) << "\t"
        << fmt(br.rate_c_mva) << "\t" << fmt(br.tap) << "\t" << fmt(br.shift_deg) << "\t"
        << br.status << ";\n";
  }
  out << "];\n\nmpc.gencost = [\n";
  for (const auto& c : net.cost_curves) {
    out << "\t2\t" << fmt(c.startup) << "\t" << fmt(c.shutdown) << "\t3\t" << fmt(c.c2) << "\t"
        << fmt(c.c1) << "\t" << fmt(c.c0) << ";\n";
  }
  out << "];\n";

  bool any_gain = false;
  for (const auto& g : net.generators) any_gain |= g.freq_gain != 0.0;
  if (any_gain) {
    out << "\nmpc.freqgain = [\n";
    for (std::size_t g = 0; g < net.generators.size(); ++g)
      if (net.generators[g].freq_gain != 0.0)
        out << "\t" << (g + 1) << "\t" << fmt(net.generators[g].freq_gain) << ";\n";
    out << "];\n";
  }
  return out.str();
}

}  // namespace popf
