#pragma once

// JSON documents for layouts, source configurations, trajectories and
// reports. Times are seconds, lengths millimeters, angles degrees.
//
// Layout:      {pitch, alpha_len, beta_len, cbuff, robots:[{index,x,y}], neighbors:[[...]]}
// Trajectory:  {step_deg, axis_speed_deg_s, stage,
//               robots:[{index, alpha:[[t_s,deg],...], beta:[[t_s,deg],...]}]}
// Config:      {layout:{...}, states:[{index, initial:[a,b], destination:[a,b], offline}]}

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "foldplan/errors.hpp"
#include "foldplan/grid.hpp"
#include "foldplan/pathgen.hpp"
#include "foldplan/postprocess.hpp"
#include "foldplan/resolver.hpp"
#include "foldplan/trajectory.hpp"

namespace foldplan {

using json = nlohmann::json;

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on '" + path + "'");
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed on '" + path + "'");
}

// Parses JSON text; syntax errors carry the source name and byte offset.
inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream msg;
    msg << source << ": JSON syntax error at byte " << e.byte << ": " << e.what();
    throw ParseError(msg.str());
  }
}

inline json load_json_file(const std::string& path) { return parse_json(read_text_file(path), path); }

namespace detail {

// Typed member lookup; errors name the JSON path.
template <typename T>
T get_field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(where + ": missing key '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + "/" + key + ": wrong type");
  }
}

inline const json& get_array(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(where + ": missing key '" + key + "'");
  if (!it->is_array()) throw ParseError(where + "/" + key + ": expected an array");
  return *it;
}

inline AngularPose pose_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError(where + ": expected [alpha, beta]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline json layout_to_json(const GridLayout& layout) {
  json robots = json::array();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    robots.push_back({{"index", i}, {"x", layout.robots[i].x}, {"y", layout.robots[i].y}});
  }
  return {{"pitch", layout.pitch},
          {"alpha_len", layout.geom.alpha_len},
          {"beta_len", layout.geom.beta_len},
          {"cbuff", layout.cbuff},
          {"robots", robots},
          {"neighbors", layout.neighbors}};
}

// Neighbor lists are recomputed from the geometry; a stored list that
// disagrees is rejected.
inline GridLayout layout_from_json(const json& j, const std::string& where = "layout") {
  GridLayout layout;
  layout.pitch = detail::get_field<double>(j, "pitch", where);
  layout.geom.alpha_len = detail::get_field<double>(j, "alpha_len", where);
  layout.geom.beta_len = detail::get_field<double>(j, "beta_len", where);
  layout.cbuff = detail::get_field<double>(j, "cbuff", where);
  layout.geom.validate();
  const json& robots = detail::get_array(j, "robots", where);
  for (std::size_t k = 0; k < robots.size(); ++k) {
    const std::string w = where + "/robots/" + std::to_string(k);
    const auto idx = detail::get_field<std::int64_t>(robots[k], "index", w);
    if (idx != static_cast<std::int64_t>(k)) throw ParseError(w + ": index out of order");
    layout.robots.push_back(
        {detail::get_field<double>(robots[k], "x", w), detail::get_field<double>(robots[k], "y", w)});
  }
  layout.neighbors = compute_neighbors(layout.robots, layout.neighbor_threshold());
  if (j.contains("neighbors")) {
    std::vector<std::vector<int>> stored;
    try {
      stored = j.at("neighbors").get<std::vector<std::vector<int>>>();
    } catch (const json::exception&) {
      throw ParseError(where + "/neighbors: wrong type");
    }
    if (stored != layout.neighbors) {
      throw ParseError(where + "/neighbors: lists disagree with the robot positions");
    }
  }
  return layout;
}

inline json configuration_to_json(const GridConfiguration& config) {
  json states = json::array();
  for (const auto& s : config.states) {
    states.push_back({{"index", s.index},
                      {"initial", {s.initial.alpha, s.initial.beta}},
                      {"destination", {s.destination.alpha, s.destination.beta}},
                      {"offline", s.offline}});
  }
  return {{"layout", layout_to_json(config.layout)}, {"states", states}};
}

inline GridConfiguration configuration_from_json(const json& j, const std::string& where = "config") {
  if (!j.is_object() || !j.contains("layout")) throw ParseError(where + ": missing key 'layout'");
  GridConfiguration config;
  config.layout = layout_from_json(j.at("layout"), where + "/layout");
  const json& states = detail::get_array(j, "states", where);
  if (states.size() != config.layout.size()) {
    throw ParseError(where + "/states: robot count differs from the layout");
  }
  for (std::size_t k = 0; k < states.size(); ++k) {
    const std::string w = where + "/states/" + std::to_string(k);
    RobotState s;
    s.index = static_cast<int>(k);
    if (!states[k].contains("initial")) throw ParseError(w + ": missing key 'initial'");
    if (!states[k].contains("destination")) throw ParseError(w + ": missing key 'destination'");
    s.initial = detail::pose_from_json(states[k].at("initial"), w + "/initial");
    s.destination = detail::pose_from_json(states[k].at("destination"), w + "/destination");
    s.current = s.initial;
    s.offline = states[k].value("offline", false);
    config.states.push_back(s);
  }
  return config;
}

namespace detail {

inline json axis_to_json(const AxisPath& path, double dt) {
  json out = json::array();
  for (const auto& w : path) out.push_back({static_cast<double>(w.step) * dt, w.angle});
  return out;
}

inline AxisPath axis_from_json(const json& arr, double dt, const std::string& where) {
  if (!arr.is_array()) throw ParseError(where + ": expected an array of [t_s, deg]");
  AxisPath path;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const std::string w = where + "/" + std::to_string(k);
    const json& p = arr[k];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ParseError(w + ": expected [t_s, deg]");
    }
    const double t = p[0].get<double>();
    const double s = t / dt;
    const double r = std::round(s);
    if (std::abs(s - r) > 1e-6) throw ParseError(w + ": time is not on the step lattice");
    const auto step = static_cast<std::int64_t>(r);
    if (!path.empty() && step <= path.back().step) throw ParseError(w + ": times must increase");
    path.push_back({step, p[1].get<double>()});
  }
  if (path.empty()) throw ParseError(where + ": empty axis path");
  return path;
}

}  // namespace detail

inline json trajectory_to_json(const Trajectory& traj) {
  const double dt = traj.dt();
  json robots = json::array();
  for (const auto& r : traj.robots) {
    robots.push_back({{"index", r.index},
                      {"alpha", detail::axis_to_json(r.alpha, dt)},
                      {"beta", detail::axis_to_json(r.beta, dt)}});
  }
  return {{"step_deg", traj.step_deg},
          {"axis_speed_deg_s", traj.axis_speed},
          {"stage", std::string(to_string(traj.stage))},
          {"robots", robots}};
}

inline Trajectory trajectory_from_json(const json& j, const std::string& where = "trajectory") {
  Trajectory traj;
  traj.step_deg = detail::get_field<double>(j, "step_deg", where);
  traj.axis_speed = detail::get_field<double>(j, "axis_speed_deg_s", where);
  if (!(traj.step_deg > 0.0) || !(traj.axis_speed > 0.0)) {
    throw ParseError(where + ": step_deg and axis_speed_deg_s must be positive");
  }
  traj.stage = stage_from_string(detail::get_field<std::string>(j, "stage", where));
  const json& robots = detail::get_array(j, "robots", where);
  const double dt = traj.dt();
  for (std::size_t k = 0; k < robots.size(); ++k) {
    const std::string w = where + "/robots/" + std::to_string(k);
    RobotPath r;
    r.index = detail::get_field<int>(robots[k], "index", w);
    if (r.index != static_cast<int>(k)) throw ParseError(w + ": index out of order");
    r.alpha = detail::axis_from_json(detail::get_array(robots[k], "alpha", w), dt, w + "/alpha");
    r.beta = detail::axis_from_json(detail::get_array(robots[k], "beta", w), dt, w + "/beta");
    traj.robots.push_back(std::move(r));
  }
  return traj;
}

// `with_timing` false drops wall-clock fields so repeated runs are
// byte-identical.
inline json outcome_to_json(const SolveOutcome& out, bool with_timing = true) {
  json j = {{"converged", out.converged},
            {"deadlocked_robots", out.deadlocked_robots},
            {"steps_used", out.steps_used},
            {"fold_time_s", out.fold_time(out.trajectories.step_deg, out.trajectories.axis_speed)}};
  if (with_timing) j["wall_time_s"] = out.wall_time;
  return j;
}

inline json replacement_to_json(const ReplacementReport& rep, std::size_t n_robots,
                                bool with_timing = true) {
  json counts = json::object();
  for (const auto& [k, v] : rep.replacement_draw_counts) counts[std::to_string(k)] = v;
  json j = {{"converged", rep.converged()},
            {"converged_first_pass", rep.converged_first_pass},
            {"replaced_robot_indices", rep.replaced_robot_indices},
            {"replacement_draw_counts", counts},
            {"generator_passes", rep.generator_passes},
            {"efficiency", efficiency(rep, n_robots)},
            {"first_pass_group_sizes", rep.first_pass_group_sizes},
            {"final_outcome", outcome_to_json(rep.final_outcome, with_timing)}};
  if (with_timing) j["total_wall_time_s"] = rep.total_wall_time;
  return j;
}

inline json verification_to_json(const VerificationReport& rep) {
  json v = json::array();
  for (const auto& c : rep.violations) {
    v.push_back({{"robot_i", c.robot_i}, {"robot_j", c.robot_j}, {"time_s", c.time_s},
                 {"distance_mm", c.distance_mm}});
  }
  json a = json::array();
  for (const auto& x : rep.axis_violations) {
    a.push_back({{"robot", x.robot},
                 {"axis", x.axis == 'a' ? "alpha" : "beta"},
                 {"kind", x.kind == AxisViolation::Kind::limit ? "limit" : "speed"},
                 {"time_s", x.time_s},
                 {"value", x.value}});
  }
  return {{"violations", v},
          {"collision_count", rep.collision_count},
          {"axis_violations", a},
          {"axis_violation_count", rep.axis_violation_count},
          {"min_distance_mm", std::isfinite(rep.min_distance_mm) ? json(rep.min_distance_mm) : json(nullptr)},
          {"samples", rep.samples},
          {"max_points_alpha", rep.max_points_alpha},
          {"max_points_beta", rep.max_points_beta},
          {"clean", rep.clean()}};
}

}  // namespace foldplan
