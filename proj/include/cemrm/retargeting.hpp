#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <json.hpp>

#include "cemrm/surrogate.hpp"

#include <map>
#include <string>
#include <vector>

namespace cemrm {

// One tracked hand-pose sample from a recorded stream: named keypoints in the
// headset world frame plus the wrist orientation.
struct HandFrame {
    double timestamp = 0.0;
    std::map<std::string, Eigen::Vector3d> keypoints;
    Eigen::Quaterniond wrist_orientation{1, 0, 0, 0};
    bool grasp_event = false;
};

// arccos of the normalized dot between (tip - distal) and (distal - proximal)
double bend_angle(const Eigen::Vector3d& tip, const Eigen::Vector3d& distal,
                  const Eigen::Vector3d& proximal);

// linear displacement along the motor pulley: r * dq
double pulley_displacement(double delta_q, double r_pulley);

// shortest-arc SLERP with a normalized-lerp fallback for tiny arcs
Eigen::Quaterniond slerp(const Eigen::Quaterniond& q0, const Eigen::Quaterniond& q1, double t);

struct DeltaPose {
    Eigen::Vector3d translation{0, 0, 0};
    Eigen::Quaterniond rotation{1, 0, 0, 0};
};

struct JumpTolerance {
    double translation = 0.05;  // m per step
    double rotation = 0.35;     // rad per step
};

// Per-step relative wrist transforms (local-frame deltas). Steps beyond the
// tolerance are replaced by interpolated sub-steps spread over the gap.
std::vector<DeltaPose> delta_pose_stream(const std::vector<HandFrame>& frames,
                                         const JumpTolerance& tolerance);

// scale * pinch distance, clamped to the prismatic travel range [0, travel]
double pinch_to_prismatic(const Eigen::Vector3d& thumb_tip, const Eigen::Vector3d& index_tip,
                          double mapping_scale, double travel = 0.06);

// Calibration constants for turning a raw stream into a TeleopRecord; the
// object pose comes from here because the pipeline runs offline.
struct RetargetCalibration {
    std::string object_id;
    Eigen::Vector3d object_position{0, 0, 0};
    double object_yaw = 0.0;          // about the world z axis
    double pinch_scale = 1.0;
    double prismatic_travel = 0.06;   // m
    double tendon_ds_max = 0.012;     // m at a full pi bend
};

// Reduce one marked demonstration stream to a TeleopRecord.
TeleopRecord compile_record(const std::vector<HandFrame>& frames,
                            const RetargetCalibration& calibration);

std::vector<HandFrame> load_stream(const std::string& path);  // JSON lines, one frame per line
RetargetCalibration load_calibration(const std::string& path);

void to_json(nlohmann::json& j, const HandFrame& f);
void from_json(const nlohmann::json& j, HandFrame& f);

}  // namespace cemrm
