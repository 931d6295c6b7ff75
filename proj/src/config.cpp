#include "racelmpc/config.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace racelmpc {

using nlohmann::json;

FullConfig default_config() { return FullConfig{}; }

namespace {

json to_json(const FullConfig& c) {
  json j;
  json segs = json::array();
  for (const TrackSegment& seg : c.segments) {
    segs.push_back({{"length", seg.length}, {"curvature", seg.curvature}});
  }
  j["track"] = {{"segments", segs},
                {"half_width", c.half_width},
                {"s_target", c.s_target},
                {"tail_length", c.tail_length}};
  j["vehicle"] = {
      {"mass", c.vehicle.mass},
      {"inertia_z", c.vehicle.inertia_z},
      {"lf", c.vehicle.lf},
      {"lr", c.vehicle.lr},
      {"drag", c.vehicle.drag},
      {"front_tire",
       {{"stiffness", c.vehicle.front.stiffness},
        {"shape", c.vehicle.front.shape},
        {"peak_force", c.vehicle.front.peak_force}}},
      {"rear_tire",
       {{"stiffness", c.vehicle.rear.stiffness},
        {"shape", c.vehicle.rear.shape},
        {"peak_force", c.vehicle.rear.peak_force}}},
      {"accel_min", c.vehicle.accel_min},
      {"accel_max", c.vehicle.accel_max},
      {"steer_max", c.vehicle.steer_max}};
  j["sysid"] = {{"history", c.sysid.history},
                {"lookahead", c.sysid.lookahead},
                {"past_iterations", c.sysid.past_iterations},
                {"ridge", c.sysid.ridge},
                {"distance_weights",
                 std::vector<double>(c.sysid.distance_weights.data(),
                                     c.sysid.distance_weights.data() + 6)}};
  j["lmpc"] = {{"horizon", c.lmpc.horizon},
               {"dt", c.lmpc.dt},
               {"e_y_bound", c.lmpc.e_y_bound},
               {"v_x_max", c.lmpc.v_x_max},
               {"rate_eps", c.lmpc.rate_eps},
               {"tol_feasibility", c.lmpc.tol_feasibility},
               {"tol_stationarity", c.lmpc.tol_stationarity},
               {"max_sqp_iterations", c.lmpc.max_sqp_iterations}};
  j["path_follower"] = {{"k_e_y", c.path_follower.k_e_y},
                        {"k_e_psi", c.path_follower.k_e_psi},
                        {"kp_speed", c.path_follower.kp_speed},
                        {"ki_speed", c.path_follower.ki_speed}};
  j["campaign"] = {{"max_iterations", c.campaign.max_iterations},
                   {"v_ref", c.campaign.v_ref},
                   {"seed", c.campaign.seed},
                   {"input_noise_std", c.campaign.input_noise_std}};
  return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    out = j.at(key).get<T>();
  }
}

FullConfig from_json(const json& j) {
  FullConfig c;
  if (j.contains("track")) {
    const json& t = j.at("track");
    if (t.contains("segments")) {
      c.segments.clear();
      for (const json& seg : t.at("segments")) {
        c.segments.push_back({seg.at("length").get<double>(),
                              seg.at("curvature").get<double>()});
      }
    }
    maybe(t, "half_width", c.half_width);
    maybe(t, "s_target", c.s_target);
    maybe(t, "tail_length", c.tail_length);
  }
  if (j.contains("vehicle")) {
    const json& v = j.at("vehicle");
    maybe(v, "mass", c.vehicle.mass);
    maybe(v, "inertia_z", c.vehicle.inertia_z);
    maybe(v, "lf", c.vehicle.lf);
    maybe(v, "lr", c.vehicle.lr);
    maybe(v, "drag", c.vehicle.drag);
    if (v.contains("front_tire")) {
      const json& f = v.at("front_tire");
      maybe(f, "stiffness", c.vehicle.front.stiffness);
      maybe(f, "shape", c.vehicle.front.shape);
      maybe(f, "peak_force", c.vehicle.front.peak_force);
    }
    if (v.contains("rear_tire")) {
      const json& r = v.at("rear_tire");
      maybe(r, "stiffness", c.vehicle.rear.stiffness);
      maybe(r, "shape", c.vehicle.rear.shape);
      maybe(r, "peak_force", c.vehicle.rear.peak_force);
    }
    maybe(v, "accel_min", c.vehicle.accel_min);
    maybe(v, "accel_max", c.vehicle.accel_max);
    maybe(v, "steer_max", c.vehicle.steer_max);
  }
  if (j.contains("sysid")) {
    const json& s = j.at("sysid");
    maybe(s, "history", c.sysid.history);
    maybe(s, "lookahead", c.sysid.lookahead);
    maybe(s, "past_iterations", c.sysid.past_iterations);
    maybe(s, "ridge", c.sysid.ridge);
    if (s.contains("distance_weights")) {
      const auto w = s.at("distance_weights").get<std::vector<double>>();
      if (w.size() != 6) {
        throw std::invalid_argument("distance_weights needs 6 entries");
      }
      for (int i = 0; i < 6; ++i) {
        c.sysid.distance_weights[i] = w[i];
      }
    }
  }
  if (j.contains("lmpc")) {
    const json& l = j.at("lmpc");
    maybe(l, "horizon", c.lmpc.horizon);
    maybe(l, "dt", c.lmpc.dt);
    maybe(l, "e_y_bound", c.lmpc.e_y_bound);
    maybe(l, "v_x_max", c.lmpc.v_x_max);
    maybe(l, "rate_eps", c.lmpc.rate_eps);
    maybe(l, "tol_feasibility", c.lmpc.tol_feasibility);
    maybe(l, "tol_stationarity", c.lmpc.tol_stationarity);
    maybe(l, "max_sqp_iterations", c.lmpc.max_sqp_iterations);
  }
  if (j.contains("path_follower")) {
    const json& p = j.at("path_follower");
    maybe(p, "k_e_y", c.path_follower.k_e_y);
    maybe(p, "k_e_psi", c.path_follower.k_e_psi);
    maybe(p, "kp_speed", c.path_follower.kp_speed);
    maybe(p, "ki_speed", c.path_follower.ki_speed);
  }
  if (j.contains("campaign")) {
    const json& g = j.at("campaign");
    maybe(g, "max_iterations", c.campaign.max_iterations);
    maybe(g, "v_ref", c.campaign.v_ref);
    maybe(g, "seed", c.campaign.seed);
    maybe(g, "input_noise_std", c.campaign.input_noise_std);
  }
  return c;
}

}  // namespace

FullConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file " + path.string());
  }
  json j = json::parse(in);
  return from_json(j);
}

std::string config_to_json(const FullConfig& config) {
  return to_json(config).dump(2) + "\n";
}

void save_config(const FullConfig& config,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write config file " + path.string());
  }
  out << config_to_json(config);
}

}  // namespace racelmpc
