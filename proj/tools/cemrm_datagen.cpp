// Generates the bundled surrogate data set: primitive objects in light and
// heavy classes, five scripted grasp records per object, a synthetic
// hand-frame stream with its calibration, and the golden record compiled
// from that stream. Run once from the repository root; outputs land in data/.

#include "cemrm/design_space.hpp"
#include "cemrm/retargeting.hpp"
#include "cemrm/surrogate.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cemrm;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

struct ObjectSpec {
    std::string base_name;
    bool is_disc;
    double radius;
    double half_w, half_h;  // polygon half extents
    double light_mass, heavy_mass;
    double friction;
    double wrist_height;
    double squeeze;  // extra prismatic close beyond touching, m
    double curl;     // total wrap angle for the tendon targets, rad
};

SimObject make_object(const ObjectSpec& spec, bool heavy) {
    SimObject o;
    o.object_id = spec.base_name + (heavy ? "_heavy" : "_light");
    o.is_disc = spec.is_disc;
    o.radius = spec.radius;
    if (!spec.is_disc) {
        o.vertices = {{-spec.half_w, -spec.half_h},
                      {spec.half_w, -spec.half_h},
                      {spec.half_w, spec.half_h},
                      {-spec.half_w, spec.half_h}};
    }
    o.mass = heavy ? spec.heavy_mass : spec.light_mass;
    o.friction = spec.friction;
    o.density_class = heavy ? DensityClass::heavy : DensityClass::light;
    return o;
}

std::vector<TeleopRecord> make_records(const ObjectSpec& spec, const SimObject& object) {
    // Scripted grasp against the uniform baseline hand. The wrist is placed
    // so the (fixed) finger jaw's inner surface ends up a small gap outside
    // the object and the thumb jaw closes in to a small bite; see the
    // surrogate's jaw kinematics for the surface positions.
    const DesignVector baseline = uniform_baseline(4, 40.0);
    const PhaseConfig phase;
    const double setback_fingers =
        baseline.mount_radius * 1e-3 * (1.0 - std::cos(baseline.index.phi));
    const double capsule = baseline.thumb.h[0] * 0.5e-3;
    const double e_half = phase.prismatic_travel / 2.0;

    const double finger_surface = e_half + setback_fingers - capsule;  // in hand frame
    const double thumb_surface0 = -e_half + capsule;
    const double gap = 0.0015;  // finger wall clearance at placement
    const double half_width = object.half_width();

    const double wrist_x = half_width + gap - finger_surface;
    const double close =
        std::max(0.0, (-half_width + spec.squeeze) - (wrist_x + thumb_surface0));
    const double arm = (baseline.thumb.h[0] - baseline.thumb.h_ten[0]) * 1e-3 +
                       phase.flexure_thickness / 2.0;  // baseline tendon moment arm

    const double jitters[5] = {0.0, -0.0008, 0.0008, -0.0004, 0.0004};
    const double curl_scale[5] = {1.0, 0.85, 1.15, 0.7, 1.3};
    std::vector<TeleopRecord> records;
    for (int k = 0; k < 5; ++k) {
        TeleopRecord r;
        r.object_id = object.object_id;
        r.grasp_pose.x = wrist_x + jitters[k];
        r.grasp_pose.y = spec.wrist_height;
        r.grasp_pose.theta = 0.0;
        r.prismatic_displacement = close;
        const double ds = arm * spec.curl * curl_scale[k];
        r.tendon_targets = {ds, ds, ds};
        r.lift_height = 0.08;
        records.push_back(r);
    }
    return records;
}

// --- synthetic hand-frame stream ------------------------------------------

Eigen::Vector3d bent_tip(const Eigen::Vector3d& distal, const Eigen::Vector3d& bone_dir,
                         double bend, double length) {
    // rotate the bone direction by the bend angle within the x-y plane
    const Eigen::Vector3d axis(0, 0, 1);
    const Eigen::AngleAxisd rot(bend, axis);
    return distal + rot * bone_dir * length;
}

HandFrame make_frame(double t, const Eigen::Vector3d& wrist, double yaw, double bend, double pinch,
                     bool grasp) {
    HandFrame f;
    f.timestamp = t;
    f.wrist_orientation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
    f.keypoints["wrist"] = wrist;

    const char* names[3] = {"thumb", "index", "middle"};
    const Eigen::Vector3d offsets[3] = {{-0.03, -0.02, 0.0}, {0.03, -0.02, 0.0}, {0.035, -0.02, 0.01}};
    const double bends[3] = {bend * 0.9, bend, bend * 0.95};
    for (int i = 0; i < 3; ++i) {
        const Eigen::Vector3d proximal = wrist + offsets[i];
        const Eigen::Vector3d bone(i == 0 ? 0.5 : -0.3, -0.9, 0.0);
        const Eigen::Vector3d dir = bone.normalized();
        const Eigen::Vector3d distal = proximal + dir * 0.035;
        f.keypoints[std::string(names[i]) + "_proximal"] = proximal;
        f.keypoints[std::string(names[i]) + "_distal"] = distal;
        f.keypoints[std::string(names[i]) + "_tip"] = bent_tip(distal, dir, bends[i], 0.03);
    }
    // overwrite the pinch pair so the prismatic mapping is exact
    f.keypoints["thumb_tip"] = wrist + Eigen::Vector3d(-pinch / 2.0, -0.06, 0.0);
    f.keypoints["index_tip"] = wrist + Eigen::Vector3d(pinch / 2.0, -0.06, 0.0);
    f.grasp_event = grasp;
    return f;
}

void write_stream(const fs::path& path, const std::vector<HandFrame>& frames) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& f : frames) out << nlohmann::json(f).dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("data");

    const std::vector<ObjectSpec> specs = {
        // name, disc, radius, half_w, half_h, light, heavy, friction, wrist_h, squeeze, curl
        {"disc_small", true, 0.016, 0, 0, 0.06, 0.24, 0.8, 0.100, 0.0046, 0.80},
        {"disc_large", true, 0.028, 0, 0, 0.11, 0.44, 0.8, 0.100, 0.0046, 0.50},
        {"bar_thin", false, 0, 0.020, 0.004, 0.05, 0.20, 0.6, 0.098, 0.0034, 0.65},
        {"square", false, 0, 0.017, 0.017, 0.09, 0.36, 0.9, 0.100, 0.0034, 0.70},
    };

    nlohmann::json manifest{{"objects", nlohmann::json::array()}};
    for (const auto& spec : specs) {
        for (bool heavy : {false, true}) {
            const SimObject object = make_object(spec, heavy);
            const std::string obj_rel = "objects/" + object.object_id + ".json";
            write_json(root / "bundle" / obj_rel, object);

            nlohmann::json record_paths = nlohmann::json::array();
            const auto records = make_records(spec, object);
            for (std::size_t k = 0; k < records.size(); ++k) {
                const std::string rec_rel =
                    "records/" + object.object_id + "_teleop_" + std::to_string(k) + ".json";
                write_json(root / "bundle" / rec_rel, records[k]);
                record_paths.push_back(rec_rel);
            }
            manifest["objects"].push_back({{"object", obj_rel}, {"records", record_paths}});
        }
    }
    write_json(root / "bundle" / "manifest.json", manifest);

    // sample stream: approach, grasp at frame 25, lift afterwards
    std::vector<HandFrame> frames;
    const Eigen::Vector3d object_pos(0.40, 0.10, 0.10);
    for (int i = 0; i < 40; ++i) {
        const double t = 0.03 * i;
        const double approach = std::min(1.0, i / 25.0);
        Eigen::Vector3d wrist(0.34 + 0.06 * approach, 0.205, 0.10);
        if (i > 25) wrist.y() += 0.07 * std::min(1.0, (i - 25) / 12.0);
        const double yaw = 0.1 * approach;
        const double bend = 0.15 + 1.1 * approach;
        const double pinch = 0.09 - 0.055 * approach;
        frames.push_back(make_frame(t, wrist, yaw, bend, pinch, i == 25));
    }
    write_stream(root / "streams" / "sample_grasp.jsonl", frames);

    RetargetCalibration calibration;
    calibration.object_id = "disc_small_light";
    calibration.object_position = object_pos;
    calibration.object_yaw = 0.0;
    calibration.pinch_scale = 1.0;
    calibration.prismatic_travel = 0.06;
    calibration.tendon_ds_max = 0.012;
    write_json(root / "streams" / "sample_calibration.json",
               nlohmann::json{{"object_id", calibration.object_id},
                              {"object_position", {object_pos.x(), object_pos.y(), object_pos.z()}},
                              {"object_yaw", calibration.object_yaw},
                              {"pinch_scale", calibration.pinch_scale},
                              {"prismatic_travel", calibration.prismatic_travel},
                              {"tendon_ds_max", calibration.tendon_ds_max}});

    const TeleopRecord golden = compile_record(frames, calibration);
    write_json(root / "golden" / "sample_record.json", golden);

    std::cout << "wrote bundle, sample stream and golden record under " << root << "\n";
    return 0;
}
