#include "cemrm/retargeting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cemrm {

namespace {

constexpr double kTinyArc = 1e-6;

Eigen::Quaterniond require_unit(const Eigen::Quaterniond& q, const char* what) {
    if (std::abs(q.norm() - 1.0) > 1e-6)
        throw std::invalid_argument(std::string(what) + ": quaternion is not unit-norm");
    return q.normalized();
}

// rotation of q about the world z axis (swing-twist decomposition)
double twist_about_z(const Eigen::Quaterniond& q) {
    Eigen::Quaterniond t(q.w(), 0.0, 0.0, q.z());
    if (t.norm() < 1e-12) return 0.0;
    t.normalize();
    double angle = 2.0 * std::atan2(t.z(), t.w());
    if (angle > std::numbers::pi) angle -= 2.0 * std::numbers::pi;
    if (angle < -std::numbers::pi) angle += 2.0 * std::numbers::pi;
    return angle;
}

const Eigen::Vector3d& keypoint(const HandFrame& frame, const std::string& name) {
    const auto it = frame.keypoints.find(name);
    if (it == frame.keypoints.end())
        throw std::invalid_argument("hand frame is missing keypoint '" + name + "'");
    return it->second;
}

}  // namespace

double bend_angle(const Eigen::Vector3d& tip, const Eigen::Vector3d& distal,
                  const Eigen::Vector3d& proximal) {
    const Eigen::Vector3d v1 = tip - distal;
    const Eigen::Vector3d v2 = distal - proximal;
    const double n1 = v1.norm();
    const double n2 = v2.norm();
    if (n1 < 1e-12 || n2 < 1e-12)
        throw std::invalid_argument("bend_angle: degenerate keypoints (zero-length bone)");
    const double c = std::clamp(v1.dot(v2) / (n1 * n2), -1.0, 1.0);
    return std::acos(c);
}

double pulley_displacement(double delta_q, double r_pulley) {
    if (r_pulley <= 0.0) throw std::invalid_argument("pulley_displacement: radius must be positive");
    return r_pulley * delta_q;
}

Eigen::Quaterniond slerp(const Eigen::Quaterniond& q0, const Eigen::Quaterniond& q1, double t) {
    const Eigen::Quaterniond a = require_unit(q0, "slerp");
    Eigen::Quaterniond b = require_unit(q1, "slerp");
    double dot = a.dot(b);
    if (dot < 0.0) {  // shortest arc
        b.coeffs() = -b.coeffs();
        dot = -dot;
    }
    dot = std::min(dot, 1.0);
    const double arc = std::acos(dot);
    Eigen::Quaterniond out;
    if (arc < kTinyArc) {
        out.coeffs() = (1.0 - t) * a.coeffs() + t * b.coeffs();
    } else {
        const double s = std::sin(arc);
        out.coeffs() = (std::sin((1.0 - t) * arc) / s) * a.coeffs() + (std::sin(t * arc) / s) * b.coeffs();
    }
    out.normalize();
    return out;
}

std::vector<DeltaPose> delta_pose_stream(const std::vector<HandFrame>& frames,
                                         const JumpTolerance& tolerance) {
    if (frames.size() < 2) throw std::invalid_argument("delta_pose_stream: need at least two frames");

    std::vector<DeltaPose> out;
    out.reserve(frames.size() - 1);
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
        const Eigen::Vector3d p0 = keypoint(frames[i], "wrist");
        const Eigen::Vector3d p1 = keypoint(frames[i + 1], "wrist");
        const Eigen::Quaterniond q0 = require_unit(frames[i].wrist_orientation, "delta_pose_stream");
        const Eigen::Quaterniond q1 = require_unit(frames[i + 1].wrist_orientation, "delta_pose_stream");

        const Eigen::Vector3d step = p1 - p0;
        const double angle = q0.angularDistance(q1);
        const int subs = std::max({1, static_cast<int>(std::ceil(step.norm() / tolerance.translation)),
                                   static_cast<int>(std::ceil(angle / tolerance.rotation))});

        Eigen::Vector3d prev_p = p0;
        Eigen::Quaterniond prev_q = q0;
        for (int k = 1; k <= subs; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(subs);
            const Eigen::Vector3d pk = p0 + t * step;
            const Eigen::Quaterniond qk = (k == subs) ? q1 : slerp(q0, q1, t);
            DeltaPose d;
            d.translation = prev_q.conjugate() * (pk - prev_p);
            d.rotation = prev_q.conjugate() * qk;
            d.rotation.normalize();
            out.push_back(d);
            prev_p = pk;
            prev_q = qk;
        }
    }
    return out;
}

double pinch_to_prismatic(const Eigen::Vector3d& thumb_tip, const Eigen::Vector3d& index_tip,
                          double mapping_scale, double travel) {
    if (mapping_scale <= 0.0) throw std::invalid_argument("pinch_to_prismatic: scale must be positive");
    return std::clamp(mapping_scale * (thumb_tip - index_tip).norm(), 0.0, travel);
}

TeleopRecord compile_record(const std::vector<HandFrame>& frames,
                            const RetargetCalibration& calibration) {
    const auto grasp_it = std::find_if(frames.begin(), frames.end(),
                                       [](const HandFrame& f) { return f.grasp_event; });
    if (grasp_it == frames.end())
        throw std::invalid_argument("compile_record: stream has no marked grasp event");
    const HandFrame& grasp = *grasp_it;

    const Eigen::Vector3d wrist = keypoint(grasp, "wrist");
    const Eigen::Quaterniond q_w = require_unit(grasp.wrist_orientation, "compile_record");
    const Eigen::Quaterniond q_o(Eigen::AngleAxisd(calibration.object_yaw, Eigen::Vector3d::UnitZ()));
    const Eigen::Vector3d rel = q_o.conjugate() * (wrist - calibration.object_position);

    TeleopRecord record;
    record.object_id = calibration.object_id;
    record.grasp_pose.x = rel.x();
    record.grasp_pose.y = rel.y();   // world y is up; out-of-plane z is dropped
    record.grasp_pose.theta = twist_about_z(q_o.conjugate() * q_w);

    const double extension = pinch_to_prismatic(keypoint(grasp, "thumb_tip"), keypoint(grasp, "index_tip"),
                                                calibration.pinch_scale, calibration.prismatic_travel);
    record.prismatic_displacement = std::max(0.0, calibration.prismatic_travel - extension);

    const char* fingers[3] = {"thumb", "index", "middle"};
    for (int f = 0; f < 3; ++f) {
        const std::string base = fingers[f];
        const double theta = bend_angle(keypoint(grasp, base + "_tip"), keypoint(grasp, base + "_distal"),
                                        keypoint(grasp, base + "_proximal"));
        record.tendon_targets[f] = theta / std::numbers::pi * calibration.tendon_ds_max;
    }

    double lift = 0.0;
    for (auto it = grasp_it + 1; it != frames.end(); ++it) {
        lift = std::max(lift, keypoint(*it, "wrist").y() - wrist.y());
    }
    record.lift_height = lift;
    return record;
}

std::vector<HandFrame> load_stream(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stream file: " + path);
    std::vector<HandFrame> frames;
    std::string line;
    int line_number = 0;
    double last_t = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            HandFrame f = j.get<HandFrame>();
            if (f.timestamp <= last_t) throw std::runtime_error("timestamps not strictly increasing");
            last_t = f.timestamp;
            frames.push_back(std::move(f));
        } catch (const std::exception& e) {
            throw std::runtime_error("stream parse error at line " + std::to_string(line_number) + ": " +
                                     e.what());
        }
    }
    return frames;
}

RetargetCalibration load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open calibration file: " + path);
    nlohmann::json j;
    in >> j;
    RetargetCalibration c;
    j.at("object_id").get_to(c.object_id);
    const auto pos = j.at("object_position").get<std::vector<double>>();
    if (pos.size() != 3) throw std::runtime_error("calibration: object_position needs 3 values");
    c.object_position = Eigen::Vector3d(pos[0], pos[1], pos[2]);
    c.object_yaw = j.value("object_yaw", 0.0);
    c.pinch_scale = j.value("pinch_scale", 1.0);
    c.prismatic_travel = j.value("prismatic_travel", 0.06);
    c.tendon_ds_max = j.value("tendon_ds_max", 0.012);
    return c;
}

void to_json(nlohmann::json& j, const HandFrame& f) {
    nlohmann::json kp = nlohmann::json::object();
    for (const auto& [name, p] : f.keypoints) kp[name] = {p.x(), p.y(), p.z()};
    j = nlohmann::json{{"t", f.timestamp},
                       {"keypoints", kp},
                       {"wrist_quat", {f.wrist_orientation.w(), f.wrist_orientation.x(),
                                       f.wrist_orientation.y(), f.wrist_orientation.z()}}};
    if (f.grasp_event) j["event"] = "grasp";
}

void from_json(const nlohmann::json& j, HandFrame& f) {
    j.at("t").get_to(f.timestamp);
    f.keypoints.clear();
    for (const auto& [name, p] : j.at("keypoints").items()) {
        const auto v = p.get<std::vector<double>>();
        if (v.size() != 3) throw std::runtime_error("keypoint '" + name + "' needs 3 coordinates");
        f.keypoints[name] = Eigen::Vector3d(v[0], v[1], v[2]);
    }
    const auto q = j.at("wrist_quat").get<std::vector<double>>();
    if (q.size() != 4) throw std::runtime_error("wrist_quat needs 4 values (w, x, y, z)");
    f.wrist_orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    if (std::abs(f.wrist_orientation.norm() - 1.0) > 1e-6)
        throw std::runtime_error("wrist_quat is not unit-norm");
    f.wrist_orientation.normalize();
    f.grasp_event = j.value("event", "") == "grasp";
}

}  // namespace cemrm
