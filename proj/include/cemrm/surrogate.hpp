#pragma once

#include <Eigen/Core>

#include <json.hpp>

#include "cemrm/design_space.hpp"
#include "cemrm/objective.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cemrm {

struct PlanarPose {
    double x = 0.0;      // m
    double y = 0.0;      // m
    double theta = 0.0;  // rad
};

// One grasp demonstration: wrist pose relative to the object at the grasp
// moment, prismatic closing travel, per-finger tendon displacement targets,
// and the post-grasp lift height.
struct TeleopRecord {
    std::string object_id;
    PlanarPose grasp_pose;
    double prismatic_displacement = 0.0;           // m, >= 0
    std::array<double, 3> tendon_targets{0, 0, 0};  // m: thumb, index, middle
    double lift_height = 0.0;                      // m
};

enum class DensityClass { light, heavy };

struct SimObject {
    std::string object_id;
    bool is_disc = true;
    double radius = 0.02;                    // m, disc shape
    std::vector<Eigen::Vector2d> vertices;   // m, convex polygon, CCW, local frame
    double mass = 0.1;                       // kg
    double friction = 0.8;
    DensityClass density_class = DensityClass::light;

    double bottom_offset() const;  // lowest local point relative to the centre
    double top_offset() const;
    double half_width() const;
};

struct EquilibriumSettings {
    int max_iterations = 200;
    double tolerance = 1e-6;  // N*m
    double damping = 0.7;
};

// All surrogate physical constants; everything here is config-exposed.
struct PhaseConfig {
    double dt = 1.0 / 3000.0;  // s
    int grasp_frame_cap = 800;
    int test_frames = 700;
    bool disturbance = false;         // enables the impulse test phase
    double impulse_min = 0.05;        // N*s
    double impulse_max = 0.2;         // N*s
    double prismatic_accel = 2.0;     // m/s^2
    double lift_accel = 5.0;          // m/s^2
    double tendon_force = 2.0;        // T_fixed, N
    double tendon_band = 5e-4;        // m; quasi-static regularization width of the bang-bang law
    double joint_rate = 6.0;          // rad/s; finite finger speed, caps per-frame joint travel
    double prismatic_travel = 0.06;   // m, fully-open jaw extension
    double contact_stiffness = 6000.0;  // N/m
    double contact_damping_ratio = 0.3;
    double ground_stiffness = 8000.0;
    double joint_limit = 1.4;            // rad
    double flexure_width = 0.010;        // m
    double flexure_thickness = 0.004;    // m
    double youngs_modulus = 2.0e6;       // Pa
    double gravity = 9.81;               // m/s^2
    EquilibriumSettings equilibrium;
    std::uint64_t seed = 0;
};

// Eq.-exact bang-bang tendon law: T_fixed while the current displacement has
// not passed the target, 0 afterwards.
double tendon_force(double ds_current, double ds_target, double t_fixed);

// N = ceil(sqrt(2 ds / a) / dt), with a snap against FP noise at integers.
int prismatic_frame_count(double ds, double accel, double dt);

// Per-frame displacement sequence: symmetric accelerate/decelerate ramp over
// prismatic_frame_count frames, zero terminal velocity, exact total travel.
std::vector<double> motion_profile(double ds, double accel, double dt);

// Coulomb clamp: min(|demand|, mu * N) carrying the demand's sign.
double friction_contact(double normal_force, double mu, double tangential_demand);

// Pseudo-rigid-body reduction of one finger: S torsional springs + rigid
// links, tendon moment arms from the waypoint heights.
struct FingerChain {
    int joints = 0;
    double link_length = 0.0;              // m, l_seg + l_fle
    double spring_k = 0.0;                 // N*m/rad, same for every joint
    std::vector<double> moment_arm;        // m, r_i = h_i - h_ten_i + h_fle/2
    std::vector<double> capsule_radius;    // m, h_i / 2
    std::vector<double> theta;             // rad, current joint angles

    static FingerChain from_design(const FingerDesign& finger, const PhaseConfig& config);
    double tendon_displacement() const;  // sum r_i * theta_i
    double total_flexion() const;        // sum theta_i
};

struct RolloutDiagnostics {
    double max_residual = 0.0;   // largest converged residual seen, N*m
    int nonconverged_frames = 0;
    int frames = 0;
    bool all_converged = true;
};

// Settle a single free chain (no contact) under the tendon controller until
// its joint angles stop moving; used to study actuation without a grasp.
FingerChain settle_free_chain(const FingerDesign& finger, double tendon_target,
                              const PhaseConfig& config);

// Quasi-static planar rollout of one design on one object with one record.
// Deterministic given (design, record, object, config.seed).
EvalOutcome rollout(const DesignVector& design, const TeleopRecord& record, const SimObject& object,
                    const PhaseConfig& config, RolloutDiagnostics* diagnostics = nullptr);

// Bundle of objects with their teleop records, loaded from a manifest
// directory.
struct Bundle {
    std::vector<SimObject> objects;
    std::vector<std::vector<TeleopRecord>> records;  // records[i] belongs to objects[i]
};

Bundle load_bundle(const std::string& dir);

void to_json(nlohmann::json& j, const PlanarPose& p);
void from_json(const nlohmann::json& j, PlanarPose& p);
void to_json(nlohmann::json& j, const TeleopRecord& r);
void from_json(const nlohmann::json& j, TeleopRecord& r);
void to_json(nlohmann::json& j, const SimObject& o);
void from_json(const nlohmann::json& j, SimObject& o);

}  // namespace cemrm
