#pragma once

#include <Eigen/Core>

#include <json.hpp>

#include <numbers>
#include <string>
#include <vector>

namespace cemrm {

// Bound constants for the hand design space. Lengths and heights are in
// millimetres, angles in radians.
inline constexpr double kLengthMin = 6.0;   // segment and flexure lengths
inline constexpr double kLengthMax = 18.0;
inline constexpr double kHeightMin = 4.0;   // block thickness and tendon waypoint height
inline constexpr double kHeightMax = 18.0;
// psi lives strictly inside (-pi/4, pi/4); the clamp target sits a hair
// inside so clamped designs stay valid.
inline constexpr double kPsiLimit = std::numbers::pi / 4.0 - 1e-9;
inline constexpr double kPhiLimit = std::numbers::pi / 2.0;

// One tendon-driven finger: shared segment/flexure lengths, per-block
// thicknesses h and tendon waypoint heights h_ten (base to tip), mounting
// orientation psi and mounting angle phi on the finger's half-circle.
struct FingerDesign {
    double l_seg = 12.0;         // mm
    double l_fle = 12.0;         // mm
    std::vector<double> h;       // mm, size S
    std::vector<double> h_ten;   // mm, size S, h_ten[i] <= h[i]
    double psi = 0.0;            // rad
    double phi = 0.0;            // rad, local half-circle frame
};

struct DesignVector {
    int segment_count = 4;       // S, fixed per campaign
    double mount_radius = 40.0;  // R in mm, fixed per campaign
    FingerDesign thumb;
    FingerDesign index;
    FingerDesign middle;

    // slots per finger: l_seg, l_fle, h[0..S), h_ten[0..S), psi, phi
    int dimension() const { return 3 * (2 * segment_count + 4); }
};

struct Bounds {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
};

// Bound interval per flattened slot, in the documented slot order:
// thumb, index, middle; within each finger l_seg, l_fle, h[0..S),
// h_ten[0..S), psi, phi.
std::vector<Bounds> slot_bounds(int segment_count);

Eigen::VectorXd flatten(const DesignVector& design);
DesignVector unflatten(const Eigen::VectorXd& flat, int segment_count, double mount_radius);

// Map between physical slot values and the normalized [-1, 1] action scale.
Eigen::VectorXd normalize_design(const Eigen::VectorXd& flat, const std::vector<Bounds>& bounds);
Eigen::VectorXd denormalize_design(const Eigen::VectorXd& unit, const std::vector<Bounds>& bounds);

// Mounting position on a half-circle of radius R (local frame): R*(cos, sin).
Eigen::Vector2d mount_position(double phi, double radius);

// Global-frame mount positions used by the penetration check: the thumb
// half-circle (centre (-R, 0)) and the index/middle half-circle (centre
// (+R, 0)) face each other across the prismatic joint.
Eigen::Vector2d global_mount_thumb(double phi, double radius);
Eigen::Vector2d global_mount_finger(double phi, double radius);

// The uniform baseline: l_seg = l_fle = 12, psi = 0, h = 11, h_ten = 0.5 h,
// phi = -pi/4 / +pi/4 / 0 for index / middle / thumb.
DesignVector uniform_baseline(int segment_count, double mount_radius);

// Offset a base design by an action given in normalized units (one unit of
// action = half a bound interval), clamping every slot to its interval and
// then forcing h_ten[i] <= h[i].
DesignVector apply_action(const DesignVector& base, const Eigen::VectorXd& action);

struct Validity {
    bool valid = true;
    std::vector<std::string> reasons;
};

// Bounds plus the base-footprint penetration check. Invalidity is a status,
// not an error.
Validity validate(const DesignVector& design);

void to_json(nlohmann::json& j, const FingerDesign& f);
void from_json(const nlohmann::json& j, FingerDesign& f);
void to_json(nlohmann::json& j, const DesignVector& d);
void from_json(const nlohmann::json& j, DesignVector& d);

DesignVector load_design(const std::string& path);
void save_design(const std::string& path, const DesignVector& design);

}  // namespace cemrm
