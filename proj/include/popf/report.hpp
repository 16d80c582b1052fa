#pragma once

// Machine-readable run documents (JSON) and plot-ready CSV emission.

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "popf/config.hpp"
#include "popf/verify.hpp"

namespace popf {

using Json = nlohmann::ordered_json;

inline Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Vector json_to_vector(const Json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = arr[i].get<double>();
  return v;
}

inline Json state_to_json(const VoltageState& st) {
  return Json{{"time_h", st.time_h}, {"x", vector_to_json(st.x)}};
}

inline VoltageState json_to_state(const Json& j) {
  VoltageState st;
  st.time_h = j.at("time_h").get<double>();
  st.x = json_to_vector(j.at("x"));
  return st;
}

/// Self-contained schedule document: inputs by path, controls, states.
inline Json schedule_to_json(const PeriodSchedule& sched, const std::string& case_path,
                             const std::string& forecast_path) {
  Json doc;
  doc["kind"] = "popf-lab schedule";
  doc["mode"] = sched.mode;
  doc["case"] = case_path;
  doc["forecast"] = forecast_path;
  doc["total_iterations"] = sched.total_iterations;
  Json intervals = Json::array();
  for (const auto& iv : sched.intervals) {
    Json j;
    j["t_start_h"] = iv.interval.t_start;
    j["t_end_h"] = iv.interval.t_end;
    j["parent"] = iv.interval.parent;
    j["depth"] = iv.interval.depth;
    j["guard_hit"] = iv.interval.guard_hit;
    j["jac_norm_start"] = iv.interval.jac_norm_start;
    j["jac_norm_end"] = iv.interval.jac_norm_end;
    j["gen_p_mw"] = vector_to_json(iv.gen_p_mw);
    j["gen_v_set"] = vector_to_json(iv.gen_v_set);
    j["gains_mw_per_h"] = vector_to_json(iv.gains_mw_per_h);
    j["state_start"] = state_to_json(iv.state_start);
    j["state_median"] = state_to_json(iv.state_median);
    j["state_end"] = state_to_json(iv.state_end);
    j["cost_per_h"] = iv.cost_per_h;
    j["energy_mwh"] = vector_to_json(iv.energy_mwh);
    j["iterations"] = iv.iterations;
    j["converged"] = iv.converged;
    intervals.push_back(std::move(j));
  }
  doc["intervals"] = std::move(intervals);
  return doc;
}

inline PeriodSchedule json_to_schedule(const Json& doc) {
  if (doc.value("kind", "") != "popf-lab schedule")
    throw ParseError("document is not a schedule file");
  PeriodSchedule out;
  out.mode = doc.at("mode").get<std::string>();
  out.total_iterations = doc.value("total_iterations", 0);
  for (const auto& j : doc.at("intervals")) {
    IntervalSchedule iv;
    iv.interval.t_start = j.at("t_start_h").get<double>();
    iv.interval.t_end = j.at("t_end_h").get<double>();
    iv.interval.parent = j.value("parent", 0);
    iv.interval.depth = j.value("depth", 0);
    iv.interval.guard_hit = j.value("guard_hit", false);
    iv.interval.jac_norm_start = j.value("jac_norm_start", 0.0);
    iv.interval.jac_norm_end = j.value("jac_norm_end", 0.0);
    iv.gen_p_mw = json_to_vector(j.at("gen_p_mw"));
    iv.gen_v_set = json_to_vector(j.at("gen_v_set"));
    iv.gains_mw_per_h = json_to_vector(j.at("gains_mw_per_h"));
    iv.state_start = json_to_state(j.at("state_start"));
    iv.state_median = json_to_state(j.at("state_median"));
    iv.state_end = json_to_state(j.at("state_end"));
    iv.cost_per_h = j.at("cost_per_h").get<double>();
    iv.energy_mwh = json_to_vector(j.at("energy_mwh"));
    iv.iterations = j.value("iterations", 0);
    iv.converged = j.value("converged", true);
    out.intervals.push_back(std::move(iv));
  }
  return out;
}

inline Json violations_to_json(const ViolationReport& report) {
  Json doc;
  doc["kind"] = "popf-lab violations";
  doc["samples_per_interval"] = report.samples_per_interval;
  Json intervals = Json::array();
  for (const auto& iv : report.intervals) {
    Json j;
    j["power"] = format_cvn_cva(iv.power_cvn, iv.power_cva);
    j["power_cvn"] = iv.power_cvn;
    j["power_cva_mw"] = iv.power_cva;
    j["voltage"] = format_cvn_cva(iv.voltage_cvn, iv.voltage_cva);
    j["voltage_cvn"] = iv.voltage_cvn;
    j["voltage_cva_pu"] = iv.voltage_cva;
    j["worst_power_time_h"] = iv.worst_power_time_h;
    j["worst_voltage_time_h"] = iv.worst_voltage_time_h;
    j["diverged_samples"] = iv.diverged_samples;
    intervals.push_back(std::move(j));
  }
  doc["intervals"] = std::move(intervals);
  return doc;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

/// Per-interval cost pairs for a cost-comparison chart.
inline std::string cost_plot_csv(const ComparisonSummary& cmp) {
  std::ostringstream out;
  out << "interval,t_start_h,t_end_h,topf_cost_per_h,popf_cost_per_h\n";
  char buf[160];
  for (std::size_t k = 0; k < cmp.rows.size(); ++k) {
    const auto& r = cmp.rows[k];
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g\n", k + 1, r.t_start, r.t_end,
                  r.topf_cost, r.popf_cost);
    out << buf;
  }
  return out.str();
}

/// Per-interval CVN/CVA series for violation charts.
inline std::string violation_plot_csv(const ComparisonSummary& cmp) {
  std::ostringstream out;
  out << "interval,t_start_h,topf_power_cvn,topf_power_cva_mw,topf_voltage_cvn,"
         "topf_voltage_cva_pu,popf_power_cvn,popf_power_cva_mw,popf_voltage_cvn,"
         "popf_voltage_cva_pu\n";
  char buf[256];
  for (std::size_t k = 0; k < cmp.rows.size(); ++k) {
    const auto& r = cmp.rows[k];
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%d,%.10g,%d,%.10g,%d,%.10g,%d,%.10g\n", k + 1,
                  r.t_start, r.topf.power_cvn, r.topf.power_cva, r.topf.voltage_cvn,
                  r.topf.voltage_cva, r.popf.power_cvn, r.popf.power_cva, r.popf.voltage_cvn,
                  r.popf.voltage_cva);
    out << buf;
  }
  return out.str();
}

}  // namespace popf
