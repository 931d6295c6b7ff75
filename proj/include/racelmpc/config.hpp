#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "racelmpc/lmpc.hpp"
#include "racelmpc/path_follower.hpp"
#include "racelmpc/sysid.hpp"
#include "racelmpc/track.hpp"
#include "racelmpc/vehicle.hpp"

namespace racelmpc {

struct CampaignSettings {
  int max_iterations = 30;
  double v_ref = 5.0;          // initialization and runout speed, m/s
  unsigned int seed = 0;       // disturbance stream seed
  double input_noise_std = 0.0;  // accel disturbance std; 0 = noiseless
};

/// Everything a campaign needs, loadable from one JSON file.
struct FullConfig {
  std::vector<TrackSegment> segments{
      {30.0, 0.0}, {31.4, 0.05}, {110.0, 0.0}};
  double half_width = 1.6;
  double s_target = 91.4;
  double tail_length = 70.0;

  VehicleParams vehicle;
  SysIdConfig sysid;
  LmpcConfig lmpc;
  PathFollowerGains path_follower;
  CampaignSettings campaign;

  Track make_track() const {
    return Track(segments, half_width, s_target, tail_length);
  }
};

FullConfig default_config();

FullConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const FullConfig& config);
void save_config(const FullConfig& config,
                 const std::filesystem::path& path);

}  // namespace racelmpc
