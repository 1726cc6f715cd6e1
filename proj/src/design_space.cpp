#include "cemrm/design_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cemrm {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

void append_finger_bounds(std::vector<Bounds>& out, int segment_count) {
    out.push_back({kLengthMin, kLengthMax});  // l_seg
    out.push_back({kLengthMin, kLengthMax});  // l_fle
    for (int i = 0; i < segment_count; ++i) out.push_back({kHeightMin, kHeightMax});  // h
    for (int i = 0; i < segment_count; ++i) out.push_back({kHeightMin, kHeightMax});  // h_ten
    out.push_back({-kPsiLimit, kPsiLimit});
    out.push_back({-kPhiLimit, kPhiLimit});
}

void flatten_finger(const FingerDesign& f, int segment_count, Eigen::VectorXd& out, int& at) {
    out[at++] = f.l_seg;
    out[at++] = f.l_fle;
    for (int i = 0; i < segment_count; ++i) out[at++] = f.h[i];
    for (int i = 0; i < segment_count; ++i) out[at++] = f.h_ten[i];
    out[at++] = f.psi;
    out[at++] = f.phi;
}

FingerDesign unflatten_finger(const Eigen::VectorXd& flat, int segment_count, int& at) {
    FingerDesign f;
    f.l_seg = flat[at++];
    f.l_fle = flat[at++];
    f.h.resize(segment_count);
    f.h_ten.resize(segment_count);
    for (int i = 0; i < segment_count; ++i) f.h[i] = flat[at++];
    for (int i = 0; i < segment_count; ++i) f.h_ten[i] = flat[at++];
    f.psi = flat[at++];
    f.phi = flat[at++];
    return f;
}

void check_finger_bounds(const FingerDesign& f, int segment_count, const std::string& name,
                         std::vector<std::string>& reasons) {
    auto bad = [&](const std::string& what, double v) {
        std::ostringstream os;
        os << "bound violation: " << name << "." << what << " = " << v;
        reasons.push_back(os.str());
    };
    const double eps = 1e-12;
    if (f.l_seg < kLengthMin - eps || f.l_seg > kLengthMax + eps) bad("l_seg", f.l_seg);
    if (f.l_fle < kLengthMin - eps || f.l_fle > kLengthMax + eps) bad("l_fle", f.l_fle);
    if (static_cast<int>(f.h.size()) != segment_count) bad("h.size", static_cast<double>(f.h.size()));
    if (static_cast<int>(f.h_ten.size()) != segment_count)
        bad("h_ten.size", static_cast<double>(f.h_ten.size()));
    for (int i = 0; i < segment_count && i < static_cast<int>(f.h.size()); ++i) {
        if (f.h[i] < kHeightMin - eps || f.h[i] > kHeightMax + eps) bad("h[" + std::to_string(i) + "]", f.h[i]);
    }
    for (int i = 0; i < segment_count && i < static_cast<int>(f.h_ten.size()); ++i) {
        if (f.h_ten[i] < kHeightMin - eps || f.h_ten[i] > kHeightMax + eps)
            bad("h_ten[" + std::to_string(i) + "]", f.h_ten[i]);
        if (i < static_cast<int>(f.h.size()) && f.h_ten[i] > f.h[i] + eps)
            bad("h_ten[" + std::to_string(i) + "] above h", f.h_ten[i]);
    }
    if (f.psi < -kPsiLimit - eps || f.psi > kPsiLimit + eps) bad("psi", f.psi);
    if (f.phi < -kPhiLimit - eps || f.phi > kPhiLimit + eps) bad("phi", f.phi);
}

}  // namespace

std::vector<Bounds> slot_bounds(int segment_count) {
    std::vector<Bounds> out;
    out.reserve(3 * (2 * segment_count + 4));
    for (int finger = 0; finger < 3; ++finger) append_finger_bounds(out, segment_count);
    return out;
}

Eigen::VectorXd flatten(const DesignVector& design) {
    Eigen::VectorXd out(design.dimension());
    int at = 0;
    flatten_finger(design.thumb, design.segment_count, out, at);
    flatten_finger(design.index, design.segment_count, out, at);
    flatten_finger(design.middle, design.segment_count, out, at);
    return out;
}

DesignVector unflatten(const Eigen::VectorXd& flat, int segment_count, double mount_radius) {
    DesignVector d;
    d.segment_count = segment_count;
    d.mount_radius = mount_radius;
    if (flat.size() != d.dimension())
        throw std::invalid_argument("unflatten: vector has dimension " + std::to_string(flat.size()) +
                                    ", expected " + std::to_string(d.dimension()));
    int at = 0;
    d.thumb = unflatten_finger(flat, segment_count, at);
    d.index = unflatten_finger(flat, segment_count, at);
    d.middle = unflatten_finger(flat, segment_count, at);
    return d;
}

Eigen::VectorXd normalize_design(const Eigen::VectorXd& flat, const std::vector<Bounds>& bounds) {
    Eigen::VectorXd out(flat.size());
    for (int i = 0; i < flat.size(); ++i)
        out[i] = 2.0 * (flat[i] - bounds[i].lo) / bounds[i].width() - 1.0;
    return out;
}

Eigen::VectorXd denormalize_design(const Eigen::VectorXd& unit, const std::vector<Bounds>& bounds) {
    Eigen::VectorXd out(unit.size());
    for (int i = 0; i < unit.size(); ++i)
        out[i] = bounds[i].lo + (unit[i] + 1.0) * 0.5 * bounds[i].width();
    return out;
}

Eigen::Vector2d mount_position(double phi, double radius) {
    return {radius * std::cos(phi), radius * std::sin(phi)};
}

Eigen::Vector2d global_mount_thumb(double phi, double radius) {
    return {-radius + radius * std::cos(phi), radius * std::sin(phi)};
}

Eigen::Vector2d global_mount_finger(double phi, double radius) {
    return {radius - radius * std::cos(phi), radius * std::sin(phi)};
}

DesignVector uniform_baseline(int segment_count, double mount_radius) {
    if (segment_count < 2) throw std::invalid_argument("uniform_baseline: segment_count must be >= 2");
    FingerDesign f;
    f.l_seg = 12.0;
    f.l_fle = 12.0;
    f.h.assign(segment_count, 11.0);
    f.h_ten.assign(segment_count, 5.5);
    f.psi = 0.0;

    DesignVector d;
    d.segment_count = segment_count;
    d.mount_radius = mount_radius;
    d.thumb = f;
    d.index = f;
    d.middle = f;
    d.thumb.phi = 0.0;
    d.index.phi = -std::numbers::pi / 4.0;
    d.middle.phi = std::numbers::pi / 4.0;
    return d;
}

DesignVector apply_action(const DesignVector& base, const Eigen::VectorXd& action) {
    if (action.size() != base.dimension())
        throw std::invalid_argument("apply_action: action has dimension " + std::to_string(action.size()) +
                                    ", expected " + std::to_string(base.dimension()));
    const auto bounds = slot_bounds(base.segment_count);
    Eigen::VectorXd flat = flatten(base);
    for (int i = 0; i < flat.size(); ++i) {
        // one normalized action unit = half the slot's bound interval
        flat[i] = clamp(flat[i] + action[i] * 0.5 * bounds[i].width(), bounds[i].lo, bounds[i].hi);
    }
    DesignVector out = unflatten(flat, base.segment_count, base.mount_radius);
    for (FingerDesign* f : {&out.thumb, &out.index, &out.middle}) {
        for (int i = 0; i < base.segment_count; ++i)
            f->h_ten[i] = std::min(f->h_ten[i], f->h[i]);
    }
    return out;
}

Validity validate(const DesignVector& design) {
    Validity v;
    check_finger_bounds(design.thumb, design.segment_count, "thumb", v.reasons);
    check_finger_bounds(design.index, design.segment_count, "index", v.reasons);
    check_finger_bounds(design.middle, design.segment_count, "middle", v.reasons);

    if (v.reasons.empty()) {
        // Base footprints modelled as discs of radius max(h[0], 12)/2 at the
        // global mount positions; any pair that fails to clear is a penetration.
        struct Foot {
            std::string name;
            Eigen::Vector2d pos;
            double radius;
        };
        const double r = design.mount_radius;
        const Foot feet[3] = {
            {"thumb", global_mount_thumb(design.thumb.phi, r), std::max(design.thumb.h[0], 12.0) / 2.0},
            {"index", global_mount_finger(design.index.phi, r), std::max(design.index.h[0], 12.0) / 2.0},
            {"middle", global_mount_finger(design.middle.phi, r), std::max(design.middle.h[0], 12.0) / 2.0},
        };
        for (int a = 0; a < 3; ++a) {
            for (int b = a + 1; b < 3; ++b) {
                const double dist = (feet[a].pos - feet[b].pos).norm();
                if (!(dist > feet[a].radius + feet[b].radius)) {
                    std::ostringstream os;
                    os << "finger penetration: " << feet[a].name << " and " << feet[b].name
                       << " footprints overlap (distance " << dist << " mm)";
                    v.reasons.push_back(os.str());
                }
            }
        }
    }
    v.valid = v.reasons.empty();
    return v;
}

void to_json(nlohmann::json& j, const FingerDesign& f) {
    j = nlohmann::json{{"l_seg", f.l_seg}, {"l_fle", f.l_fle}, {"h", f.h},
                       {"h_ten", f.h_ten}, {"psi", f.psi},     {"phi", f.phi}};
}

void from_json(const nlohmann::json& j, FingerDesign& f) {
    j.at("l_seg").get_to(f.l_seg);
    j.at("l_fle").get_to(f.l_fle);
    j.at("h").get_to(f.h);
    j.at("h_ten").get_to(f.h_ten);
    j.at("psi").get_to(f.psi);
    j.at("phi").get_to(f.phi);
}

void to_json(nlohmann::json& j, const DesignVector& d) {
    j = nlohmann::json{{"segment_count", d.segment_count},
                       {"mount_radius_mm", d.mount_radius},
                       {"thumb", d.thumb},
                       {"index", d.index},
                       {"middle", d.middle}};
}

void from_json(const nlohmann::json& j, DesignVector& d) {
    j.at("segment_count").get_to(d.segment_count);
    j.at("mount_radius_mm").get_to(d.mount_radius);
    j.at("thumb").get_to(d.thumb);
    j.at("index").get_to(d.index);
    j.at("middle").get_to(d.middle);
}

DesignVector load_design(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open design file: " + path);
    nlohmann::json j;
    in >> j;
    return j.get<DesignVector>();
}

void save_design(const std::string& path, const DesignVector& design) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write design file: " + path);
    out << nlohmann::json(design).dump(2) << "\n";
}

}  // namespace cemrm
