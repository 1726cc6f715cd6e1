#include "cemrm/surrogate.hpp"

#include "cemrm/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace cemrm {

double tendon_force(double ds_current, double ds_target, double t_fixed) {
    return ds_current <= ds_target ? t_fixed : 0.0;
}

int prismatic_frame_count(double ds, double accel, double dt) {
    if (ds < 0.0 || accel <= 0.0 || dt <= 0.0)
        throw std::invalid_argument("prismatic_frame_count: need ds >= 0, accel > 0, dt > 0");
    if (ds == 0.0) return 0;
    const double exact = std::sqrt(2.0 * ds / accel) / dt;
    // snap against FP noise so analytic integer counts stay exact
    const double rounded = std::round(exact);
    if (std::abs(exact - rounded) < 1e-9) return static_cast<int>(rounded);
    return static_cast<int>(std::ceil(exact));
}

std::vector<double> motion_profile(double ds, double accel, double dt) {
    const int frames = prismatic_frame_count(ds, accel, dt);
    std::vector<double> out;
    out.reserve(frames);
    if (frames == 0) return out;
    // Symmetric ramp fitted into the planned frame count: accelerate for the
    // first half, decelerate for the second, land exactly on ds with zero
    // terminal velocity.
    const double total_time = frames * dt;
    const double ramp_accel = 4.0 * ds / (total_time * total_time);
    const double half = total_time / 2.0;
    auto position = [&](double t) {
        t = std::min(t, total_time);
        if (t <= half) return 0.5 * ramp_accel * t * t;
        const double u = total_time - t;
        return ds - 0.5 * ramp_accel * u * u;
    };
    double prev = 0.0;
    for (int f = 1; f <= frames; ++f) {
        const double p = (f == frames) ? ds : position(f * dt);
        out.push_back(p - prev);
        prev = p;
    }
    return out;
}

double friction_contact(double normal_force, double mu, double tangential_demand) {
    if (normal_force < 0.0 || mu < 0.0)
        throw std::invalid_argument("friction_contact: normal force and mu must be non-negative");
    const double cap = mu * normal_force;
    return std::clamp(tangential_demand, -cap, cap);
}

double SimObject::bottom_offset() const {
    if (is_disc) return -radius;
    double lo = 0.0;
    for (const auto& v : vertices) lo = std::min(lo, v.y());
    return lo;
}

double SimObject::top_offset() const {
    if (is_disc) return radius;
    double hi = 0.0;
    for (const auto& v : vertices) hi = std::max(hi, v.y());
    return hi;
}

double SimObject::half_width() const {
    if (is_disc) return radius;
    double w = 0.0;
    for (const auto& v : vertices) w = std::max(w, std::abs(v.x()));
    return w;
}

FingerChain FingerChain::from_design(const FingerDesign& finger, const PhaseConfig& config) {
    FingerChain c;
    c.joints = static_cast<int>(finger.h.size());
    c.link_length = (finger.l_seg + finger.l_fle) * 1e-3;
    const double h_fle = config.flexure_thickness;
    // Cantilever-style torsional spring: k = E w h_fle^3 / (12 l_fle).
    c.spring_k = config.youngs_modulus * config.flexure_width * h_fle * h_fle * h_fle /
                 (12.0 * finger.l_fle * 1e-3);
    c.moment_arm.resize(c.joints);
    c.capsule_radius.resize(c.joints);
    c.theta.assign(c.joints, 0.0);
    for (int i = 0; i < c.joints; ++i) {
        c.moment_arm[i] = (finger.h[i] - finger.h_ten[i]) * 1e-3 + h_fle / 2.0;
        c.capsule_radius[i] = finger.h[i] * 0.5e-3;
    }
    return c;
}

double FingerChain::tendon_displacement() const {
    double ds = 0.0;
    for (int i = 0; i < joints; ++i) ds += moment_arm[i] * theta[i];
    return ds;
}

double FingerChain::total_flexion() const {
    double sum = 0.0;
    for (double t : theta) sum += t;
    return sum;
}

namespace {

using Eigen::Vector2d;

double cross2(const Vector2d& a, const Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

Vector2d closest_point_on_segment(const Vector2d& a, const Vector2d& b, const Vector2d& p) {
    const Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 < 1e-18) return a;
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return a + t * ab;
}

// closest pair between segments (a0,a1) and (b0,b1)
void closest_segment_segment(const Vector2d& a0, const Vector2d& a1, const Vector2d& b0,
                             const Vector2d& b1, Vector2d& on_a, Vector2d& on_b) {
    // sample candidate pairs: endpoint projections both ways
    struct Pair {
        Vector2d pa, pb;
        double d2;
    };
    Pair best{a0, b0, std::numeric_limits<double>::max()};
    auto consider = [&](const Vector2d& pa, const Vector2d& pb) {
        const double d2 = (pa - pb).squaredNorm();
        if (d2 < best.d2) best = {pa, pb, d2};
    };
    consider(a0, closest_point_on_segment(b0, b1, a0));
    consider(a1, closest_point_on_segment(b0, b1, a1));
    {
        const Vector2d q0 = closest_point_on_segment(a0, a1, b0);
        consider(q0, b0);
        const Vector2d q1 = closest_point_on_segment(a0, a1, b1);
        consider(q1, b1);
    }
    // proper crossing: if the segments intersect, distance is zero
    const Vector2d r = a1 - a0, s = b1 - b0;
    const double denom = cross2(r, s);
    if (std::abs(denom) > 1e-18) {
        const double t = cross2(b0 - a0, s) / denom;
        const double u = cross2(b0 - a0, r) / denom;
        if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) {
            const Vector2d x = a0 + t * r;
            best = {x, x, 0.0};
        }
    }
    on_a = best.pa;
    on_b = best.pb;
}

bool point_in_convex(const std::vector<Vector2d>& verts, const Vector2d& p) {
    const std::size_t n = verts.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vector2d& a = verts[i];
        const Vector2d& b = verts[(i + 1) % n];
        if (cross2(b - a, p - a) < 0.0) return false;  // CCW winding
    }
    return true;
}

struct ObjectState {
    const SimObject* shape = nullptr;
    Vector2d pos{0, 0};
    Vector2d vel{0, 0};
    double bottom() const { return pos.y() + shape->bottom_offset(); }
};

// Signed distance from a probe point to the object's surface (negative
// inside) with the separation direction. Links carry fixed sample spheres
// instead of a swept capsule so contact points are material points and never
// jump along flat-on-flat geometry.
struct SurfaceHit {
    double dist = std::numeric_limits<double>::max();  // signed, negative inside
    Vector2d toward{0, 0};  // unit, pointing from the probe into the object
};

SurfaceHit object_point_query(const ObjectState& obj, const Vector2d& p) {
    SurfaceHit hit;
    if (obj.shape->is_disc) {
        const Vector2d d = obj.pos - p;
        const double dist_centre = d.norm();
        if (dist_centre < 1e-12) {
            hit.dist = -obj.shape->radius;
            hit.toward = Vector2d(0, 1);
            return hit;
        }
        hit.toward = d / dist_centre;
        hit.dist = dist_centre - obj.shape->radius;
        return hit;
    }

    double best = std::numeric_limits<double>::max();
    Vector2d best_q{0, 0};
    const auto& verts = obj.shape->vertices;
    const std::size_t n = verts.size();
    bool inside = true;
    for (std::size_t i = 0; i < n; ++i) {
        const Vector2d a = obj.pos + verts[i];
        const Vector2d b = obj.pos + verts[(i + 1) % n];
        if (cross2(b - a, p - a) < 0.0) inside = false;  // CCW winding
        const Vector2d q = closest_point_on_segment(a, b, p);
        const double d = (q - p).norm();
        if (d < best) {
            best = d;
            best_q = q;
        }
    }
    if (best < 1e-12) {
        hit.dist = 0.0;
        const Vector2d d = obj.pos - p;
        hit.toward = d.norm() > 1e-12 ? Vector2d(d / d.norm()) : Vector2d(0, 1);
        return hit;
    }
    // the separating direction is the same expression either side of the
    // boundary, so the normal is continuous across contact onset
    hit.dist = inside ? -best : best;
    hit.toward = inside ? Vector2d((p - best_q) / best) : Vector2d((best_q - p) / best);
    return hit;
}

// fractional positions of the contact sample spheres along each link
constexpr double kLinkSamples[3] = {1.0 / 3.0, 2.0 / 3.0, 1.0};

struct ChainInstance {
    FingerChain chain;
    double side = 1.0;        // +1 thumb jaw, -1 finger jaw
    double psi = 0.0;
    double base_setback = 0.0;  // m behind the jaw's inner edge
    double tendon_target = 0.0;
    double tension = 0.0;  // solved tendon tension, warm-started across frames
};

struct HandKinematics {
    Vector2d wrist{0, 0};
    double hand_theta = 0.0;
    double open_extension = 0.0;  // e0
    double closed = 0.0;          // s(t)
    Vector2d wrist_vel{0, 0};
    double close_rate = 0.0;  // ds/dt

    Vector2d to_world(const Vector2d& hand_point) const {
        const double c = std::cos(hand_theta), s = std::sin(hand_theta);
        return wrist + Vector2d(c * hand_point.x() - s * hand_point.y(),
                                s * hand_point.x() + c * hand_point.y());
    }
    Vector2d rotate(const Vector2d& v) const {
        const double c = std::cos(hand_theta), s = std::sin(hand_theta);
        return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
    }
};

Vector2d chain_base(const ChainInstance& ci, const HandKinematics& hk) {
    const double e_half = hk.open_extension / 2.0;
    double x;
    if (ci.side > 0) {
        x = -e_half + hk.closed - ci.base_setback;  // thumb jaw moves when closing
    } else {
        x = e_half + ci.base_setback;
    }
    return hk.to_world(Vector2d(x, 0.0));
}

void chain_joint_positions(const ChainInstance& ci, const HandKinematics& hk,
                           std::vector<Vector2d>& joints) {
    joints.resize(ci.chain.joints + 1);
    joints[0] = chain_base(ci, hk);
    double gamma = ci.psi;
    for (int i = 0; i < ci.chain.joints; ++i) {
        gamma += ci.chain.theta[i];
        const double beta = hk.hand_theta - std::numbers::pi / 2.0 + ci.side * gamma;
        joints[i + 1] = joints[i] + ci.chain.link_length * Vector2d(std::cos(beta), std::sin(beta));
    }
}

Vector2d chain_point_velocity(const ChainInstance& ci, const HandKinematics& hk) {
    Vector2d v = hk.wrist_vel;
    if (ci.side > 0) v += hk.rotate(Vector2d(hk.close_rate, 0.0));
    return v;
}

struct Contact {
    Vector2d point{0, 0};
    Vector2d normal{0, 0};  // unit, pointing from finger into object
    double penetration = 0.0;
    double elastic_force = 0.0;  // k_c * penetration, the force the chain solve sees
    int link = 0;
    int chain = 0;
};

// Geometric contacts of one chain against the object at its current joint
// angles. The chain equilibrium works against the pure elastic penalty;
// velocity-dependent damping and friction act on the object only, so the
// solve stays a function of configuration alone.
void collect_chain_contacts(const ChainInstance& ci, const std::vector<Vector2d>& joints,
                            const ObjectState& obj, const PhaseConfig& cfg,
                            std::vector<Contact>& out) {
    for (int link = 0; link < ci.chain.joints; ++link) {
        for (double t : kLinkSamples) {
            const Vector2d probe = joints[link] + t * (joints[link + 1] - joints[link]);
            const SurfaceHit hit = object_point_query(obj, probe);
            const double pen = ci.chain.capsule_radius[link] - hit.dist;
            if (pen <= 0.0) continue;

            Contact c;
            c.link = link;
            c.normal = hit.toward;
            c.penetration = pen;
            c.point = probe + hit.toward * ci.chain.capsule_radius[link];
            c.elastic_force = cfg.contact_stiffness * pen;
            out.push_back(c);
        }
    }
}

// torque about each joint from the elastic contact reactions (force on the
// finger is opposite the normal pointing into the object)
void accumulate_contact_torques(const ChainInstance& ci, const std::vector<Vector2d>& joints,
                                const std::vector<Contact>& contacts, std::vector<double>& torque) {
    for (const auto& c : contacts) {
        const Vector2d f_on_link = -c.elastic_force * c.normal;
        for (int j = 0; j <= c.link; ++j) {
            torque[j] += ci.side * cross2(c.point - joints[j], f_on_link);
        }
    }
}

struct SolveResult {
    bool converged = false;
    double residual = 0.0;
    int iterations = 0;
};

int solver_trace_level() {
    static const int level = [] {
        const char* env = std::getenv("CEMRM_TRACE_SOLVER");
        return env ? std::atoi(env) : 0;
    }();
    return level;
}

// The per-frame quasi-static chain solve. The tendon controller is bang-bang
// (tendon_force), which has no static fixed point when the displacement sits
// at its target, so the solve resolves the controller's sliding mode instead:
// an outer safeguarded root-find on the tendon tension (0..T_fixed, linear
// inside a narrow displacement band around the target, exact bang-bang
// outside it) around an inner damped diagonal-Newton solve of the
// spring/contact torque balance at fixed tension.
class ChainSolver {
public:
    // Each frame solves the equilibrium reachable at finite finger speed: a
    // per-joint travel box of joint_rate * dt around the frame-start angles.
    // Joints pinned at the box move at their speed limit; their torque excess
    // is motion, not residual, so the residual is projected there just as at
    // the structural joint limits.
    ChainSolver(ChainInstance& ci, const HandKinematics& hk, const ObjectState& obj,
                const PhaseConfig& cfg)
        : ci_(ci), hk_(hk), obj_(obj), cfg_(cfg), n_(ci.chain.joints),
          torque_(n_, 0.0), stiffness_(n_, 0.0), box_lo_(n_, 0.0), box_hi_(n_, 0.0) {
        const double travel = cfg.joint_rate * cfg.dt;
        for (int i = 0; i < n_; ++i) {
            box_lo_[i] = std::max(0.0, ci.chain.theta[i] - travel);
            box_hi_[i] = std::min(cfg.joint_limit, ci.chain.theta[i] + travel);
        }
    }

    SolveResult solve() {
        SolveResult result;
        const double t_max = cfg_.tendon_force;
        double tau = std::clamp(ci_.tension, 0.0, t_max);
        double lo = 0.0, hi = t_max;
        const bool trace = solver_trace_level() >= 1;

        // The tension consistency equation amplifies joint-angle error by the
        // band gain, so the inner solve must be tighter by that factor. The
        // free-chain gain bounds the contact case (contacts only stiffen).
        double free_gain = 0.0;
        if (t_max > 0.0 && cfg_.tendon_band > 0.0) {
            double sum_r2 = 0.0;
            for (int i = 0; i < n_; ++i) sum_r2 += ci_.chain.moment_arm[i] * ci_.chain.moment_arm[i];
            free_gain = (t_max / cfg_.tendon_band) * sum_r2 / ci_.chain.spring_k;
        }
        inner_tolerance_ = cfg_.equilibrium.tolerance * 0.25 / (1.0 + free_gain);

        bool tried_release = false;
        for (int outer = 0; outer < 80; ++outer) {
            const std::vector<double> theta_backup = ci_.chain.theta;
            if (!inner_solve(tau, result)) {
                if (trace)
                    std::fprintf(stderr, "  outer %d: inner failed at tau=%g\n", outer, tau);
                // a tension that cannot equilibrate normally means the chain
                // was slammed through the object; check the released-tendon
                // branch of the bang-bang law once, then retry lower
                ci_.chain.theta = theta_backup;
                if (!tried_release && t_max > 0.0) {
                    tried_release = true;
                    tau = 0.0;
                    continue;
                }
                if (tau <= lo + 1e-12 || t_max <= 0.0) return result;
                hi = tau;
                tau = 0.5 * (lo + hi);
                continue;
            }
            const double ds = ci_.chain.tendon_displacement();
            const double required = band_tension(ds);
            result.residual = projected_residual(required);
            if (trace)
                std::fprintf(stderr, "  outer %d: tau=%.9g ds=%.9g req=%.9g res=%.3g [%g,%g]\n",
                             outer, tau, ds, required, result.residual, lo, hi);
            if (result.residual < cfg_.equilibrium.tolerance) {
                result.converged = true;
                ci_.tension = tau;
                return result;
            }
            // The bang-bang law's own branches are equally valid equilibria;
            // contact can hold the displacement past its target with the
            // tendon released (slack), or block it below target at full pull.
            if (tau <= 1e-15 && ds > ci_.tendon_target) {
                result.residual = projected_residual(0.0);
                if (result.residual < cfg_.equilibrium.tolerance) {
                    result.converged = true;
                    ci_.tension = 0.0;
                    return result;
                }
            }
            if (tau >= t_max - 1e-15 && ds <= ci_.tendon_target) {
                result.residual = projected_residual(t_max);
                if (result.residual < cfg_.equilibrium.tolerance) {
                    result.converged = true;
                    ci_.tension = t_max;
                    return result;
                }
            }
            if (t_max <= 0.0) return result;  // nothing left to adjust

            if (tau > required) {
                hi = tau;
            } else {
                lo = tau;
            }
            // Newton step on the tension consistency equation with bisection
            // as the safeguard; inside the band the equation is linear in tau
            // with slope 1 + (T/band) * d(ds)/d(tau), outside it the required
            // tension is saturated so the step jumps straight to it
            const bool near_band = ds > ci_.tendon_target - cfg_.tendon_band &&
                                   ds < ci_.tendon_target + 2.0 * cfg_.tendon_band;
            double next;
            if (near_band) {
                // sensitivity of the displacement to tension through the free
                // joints only; pinned joints cannot respond within the frame
                double dds_dtau = 0.0;
                for (int i = 0; i < n_; ++i) {
                    const double r = ci_.chain.spring_k * ci_.chain.theta[i] - torque_[i];
                    if (!pinned(i, r))
                        dds_dtau += ci_.chain.moment_arm[i] * ci_.chain.moment_arm[i] / stiffness_[i];
                }
                const double gain = (t_max / std::max(cfg_.tendon_band, 1e-9)) * dds_dtau;
                next = tau + (required - tau) / (1.0 + gain);
            } else {
                next = required;
            }
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            tau = next;
            if (hi - lo < 1e-9 * std::max(1.0, t_max)) {
                // band root pinched off by a snap-through; fall back to the
                // exact law's release branch once before giving up
                if (tried_release) break;
                tried_release = true;
                tau = 0.0;
                lo = 0.0;
                hi = t_max;
            }
        }
        return result;
    }

private:
    double band_tension(double ds) const {
        const double band = cfg_.tendon_band;
        if (band <= 0.0) return tendon_force(ds, ci_.tendon_target, cfg_.tendon_force);
        const double x = (ci_.tendon_target + band - ds) / band;
        return cfg_.tendon_force * std::clamp(x, 0.0, 1.0);
    }

    void refresh(double tau) {
        chain_joint_positions(ci_, hk_, joints_);
        contacts_.clear();
        collect_chain_contacts(ci_, joints_, obj_, cfg_, contacts_);
        std::fill(torque_.begin(), torque_.end(), 0.0);
        accumulate_contact_torques(ci_, joints_, contacts_, torque_);

        // Gauss-Newton system: spring diagonal plus one rank-one block per
        // contact from the penalty stiffness through the joint lever arms
        // (friction and normal-rotation terms dropped).
        jacobian_ = Eigen::MatrixXd::Identity(n_, n_) * ci_.chain.spring_k;
        for (const auto& c : contacts_) {
            Eigen::VectorXd lever = Eigen::VectorXd::Zero(n_);
            for (int i = 0; i <= c.link; ++i)
                lever[i] = ci_.side * cross2(c.point - joints_[i], c.normal);
            jacobian_ += cfg_.contact_stiffness * lever * lever.transpose();
        }
        for (int i = 0; i < n_; ++i) {
            torque_[i] += tau * ci_.chain.moment_arm[i];
            stiffness_[i] = jacobian_(i, i);
        }
    }

    bool pinned(int i, double r) const {
        const bool at_low = ci_.chain.theta[i] <= box_lo_[i] && r > 0.0;
        const bool at_high = ci_.chain.theta[i] >= box_hi_[i] && r < 0.0;
        return at_low || at_high;
    }

    double projected_residual(double tau_replacing) const {
        // residual with the band-consistent tension swapped in for the solved one
        double residual = 0.0;
        for (int i = 0; i < n_; ++i) {
            const double rhs = torque_[i] - last_tau_ * ci_.chain.moment_arm[i] +
                               tau_replacing * ci_.chain.moment_arm[i];
            const double r = ci_.chain.spring_k * ci_.chain.theta[i] - rhs;
            if (!pinned(i, r)) residual = std::max(residual, std::abs(r));
        }
        return residual;
    }

    double inner_residual() const {
        double residual = 0.0;
        for (int i = 0; i < n_; ++i) {
            const double r = ci_.chain.spring_k * ci_.chain.theta[i] - torque_[i];
            if (!pinned(i, r)) residual = std::max(residual, std::abs(r));
        }
        return residual;
    }

    // squared L2 of the projected residual; the line-search metric, matching
    // the least-squares geometry of the Newton step
    double inner_residual_l2() const {
        double sum = 0.0;
        for (int i = 0; i < n_; ++i) {
            const double r = ci_.chain.spring_k * ci_.chain.theta[i] - torque_[i];
            if (!pinned(i, r)) sum += r * r;
        }
        return sum;
    }

    bool inner_solve(double tau, SolveResult& result) {
        last_tau_ = tau;
        const double tol = inner_tolerance_;
        refresh(tau);
        double residual = inner_residual();

        for (int iter = 0; iter <= cfg_.equilibrium.max_iterations; ++iter) {
            result.iterations += 1;
            if (residual < tol) return true;  // theta matches the last refresh
            if (iter == cfg_.equilibrium.max_iterations) break;

            // active-set projected Newton: joints pinned at the travel box are
            // frozen and the system is solved on the free subspace, otherwise
            // the step lands in the contact null-space and stalls
            std::vector<int> free_joints;
            Eigen::VectorXd g(n_);
            for (int i = 0; i < n_; ++i) {
                g[i] = torque_[i] - ci_.chain.spring_k * ci_.chain.theta[i];
                if (!pinned(i, -g[i])) free_joints.push_back(i);
            }
            Eigen::VectorXd step = Eigen::VectorXd::Zero(n_);
            if (!free_joints.empty()) {
                const int nf = static_cast<int>(free_joints.size());
                Eigen::MatrixXd jf(nf, nf);
                Eigen::VectorXd gf(nf);
                for (int a = 0; a < nf; ++a) {
                    gf[a] = g[free_joints[a]];
                    for (int b = 0; b < nf; ++b) jf(a, b) = jacobian_(free_joints[a], free_joints[b]);
                }
                const Eigen::VectorXd sf = jf.ldlt().solve(gf);
                for (int a = 0; a < nf; ++a) step[free_joints[a]] = sf[a];
            }
            // trust region at the per-frame travel: larger steps only
            // saturate at the box walls and starve the line search
            const double travel = cfg_.joint_rate * cfg_.dt;
            const double biggest = step.cwiseAbs().maxCoeff();
            if (biggest > travel) step *= travel / biggest;

            // backtracking line search: contact onset is not in the Jacobian
            // of the contact-free state, so raw Newton steps flap across the
            // surface; only accept steps that reduce the least-squares residual
            const std::vector<double> base = ci_.chain.theta;
            const double l2 = inner_residual_l2();
            double scale = cfg_.equilibrium.damping;
            double tried = residual;
            int ls_used = 0;
            for (int ls = 0; ls < 28; ++ls) {
                ls_used = ls;
                for (int i = 0; i < n_; ++i)
                    ci_.chain.theta[i] = std::clamp(base[i] + scale * step[i], box_lo_[i], box_hi_[i]);
                refresh(tau);
                tried = inner_residual();
                if (inner_residual_l2() < l2 * (1.0 - 1e-9) || tried < tol) break;
                scale *= 0.5;
            }
            residual = tried;  // smallest-scale trial stands even without improvement
            if (solver_trace_level() >= 3)
                std::fprintf(stderr, "    inner %d: tau=%g res=%g ls=%d contacts=%zu\n", iter, tau,
                             residual, ls_used, contacts_.size());
        }
        result.converged = false;
        return false;
    }

    ChainInstance& ci_;
    const HandKinematics& hk_;
    const ObjectState& obj_;
    const PhaseConfig& cfg_;
    int n_;
    std::vector<Vector2d> joints_;
    std::vector<Contact> contacts_;
    Eigen::MatrixXd jacobian_;
    std::vector<double> torque_;     // contact + tendon torque at last refresh
    std::vector<double> stiffness_;  // diagonal stiffness at last refresh
    std::vector<double> box_lo_;     // per-frame reachable joint range
    std::vector<double> box_hi_;
    double last_tau_ = 0.0;
    double inner_tolerance_ = 1e-9;
};

SolveResult solve_chain_equilibrium(ChainInstance& ci, const HandKinematics& hk,
                                    const ObjectState& obj, const PhaseConfig& cfg) {
    ChainSolver solver(ci, hk, obj, cfg);
    return solver.solve();
}

}  // namespace

FingerChain settle_free_chain(const FingerDesign& finger, double tendon_target,
                              const PhaseConfig& config) {
    ChainInstance ci{FingerChain::from_design(finger, config), +1.0, finger.psi, 0.0, tendon_target,
                     config.tendon_force};
    HandKinematics hk;
    hk.open_extension = config.prismatic_travel;

    SimObject faraway;
    faraway.is_disc = true;
    faraway.radius = 0.001;
    ObjectState obj;
    obj.shape = &faraway;
    obj.pos = Vector2d(1e3, 1e3);

    std::vector<double> previous = ci.chain.theta;
    for (int frame = 0; frame < 12000; ++frame) {
        (void)solve_chain_equilibrium(ci, hk, obj, config);
        double moved = 0.0;
        for (int i = 0; i < ci.chain.joints; ++i)
            moved = std::max(moved, std::abs(ci.chain.theta[i] - previous[i]));
        if (moved < 1e-12) break;
        previous = ci.chain.theta;
    }
    return ci.chain;
}

EvalOutcome rollout(const DesignVector& design, const TeleopRecord& record, const SimObject& object,
                    const PhaseConfig& config, RolloutDiagnostics* diagnostics) {
    EvalOutcome outcome;
    RolloutDiagnostics local_diag;
    RolloutDiagnostics& diag = diagnostics ? *diagnostics : local_diag;
    diag = RolloutDiagnostics{};

    const Validity validity = validate(design);
    if (!validity.valid) {
        outcome.design_valid = false;
        return outcome;
    }

    const double radius_m = design.mount_radius * 1e-3;
    HandKinematics hk;
    hk.open_extension = config.prismatic_travel;

    ObjectState obj;
    obj.shape = &object;
    // rest pose pre-settled into the ground penalty so nothing moves at t=0
    obj.pos = Vector2d(0.0, -object.bottom_offset() -
                                object.mass * config.gravity / config.ground_stiffness);

    hk.wrist = obj.pos + Vector2d(record.grasp_pose.x, record.grasp_pose.y);
    hk.hand_theta = record.grasp_pose.theta;

    std::array<ChainInstance, 3> chains = {
        ChainInstance{FingerChain::from_design(design.thumb, config), +1.0, design.thumb.psi,
                      radius_m * (1.0 - std::cos(design.thumb.phi)), record.tendon_targets[0],
                      config.tendon_force},
        ChainInstance{FingerChain::from_design(design.index, config), -1.0, design.index.psi,
                      radius_m * (1.0 - std::cos(design.index.phi)), record.tendon_targets[1],
                      config.tendon_force},
        ChainInstance{FingerChain::from_design(design.middle, config), -1.0, design.middle.psi,
                      radius_m * (1.0 - std::cos(design.middle.phi)), record.tendon_targets[2],
                      config.tendon_force},
    };

    const double close_travel = std::min(record.prismatic_displacement, config.prismatic_travel);
    const std::vector<double> close_profile = motion_profile(close_travel, config.prismatic_accel, config.dt);
    const std::vector<double> lift_profile = motion_profile(record.lift_height, config.lift_accel, config.dt);

    const Vector2d rel0 = obj.pos - hk.wrist;
    const double start_height = obj.pos.y();
    const double mass = object.mass;

    bool left_ground = false;
    bool lift_started = false;
    double final_total_normal = 0.0;
    double final_min_gap = std::numeric_limits<double>::max();

    const int grasp_frames = config.grasp_frame_cap;
    const int lift_frames = static_cast<int>(lift_profile.size());
    const int test_frames = config.disturbance ? config.test_frames : 0;
    const int total_frames = grasp_frames + lift_frames + test_frames;

    Rng impulse_rng(derive_seed(config.seed, Stream::impulse));

    std::vector<Vector2d> joints;
    std::vector<Contact> contacts;
    std::vector<Contact> frame_contacts;

    for (int frame = 0; frame < total_frames; ++frame) {
        // -- phase kinematics --
        hk.wrist_vel = Vector2d(0, 0);
        hk.close_rate = 0.0;
        final_min_gap = std::numeric_limits<double>::max();
        if (frame < grasp_frames) {
            if (frame < static_cast<int>(close_profile.size())) {
                hk.closed += close_profile[frame];
                hk.close_rate = close_profile[frame] / config.dt;
            }
        } else if (frame < grasp_frames + lift_frames) {
            if (!lift_started) {
                lift_started = true;
            }
            const double dy = lift_profile[frame - grasp_frames];
            hk.wrist.y() += dy;
            hk.wrist_vel = Vector2d(0.0, dy / config.dt);
        } else if (frame == grasp_frames + lift_frames && config.disturbance) {
            lift_started = true;  // zero-length lift still marks the phase change
            const double impulse = impulse_rng.uniform(config.impulse_min, config.impulse_max);
            obj.vel.y() -= impulse / mass;
        }
        if (!lift_started && frame >= grasp_frames) lift_started = true;

        // -- chain equilibrium, object frozen --
        frame_contacts.clear();
        for (int chain_index = 0; chain_index < 3; ++chain_index) {
            ChainInstance& ci = chains[chain_index];
            const SolveResult sr = solve_chain_equilibrium(ci, hk, obj, config);
            if (!sr.converged) {
                if (std::getenv("CEMRM_TRACE_FAIL")) {
                    std::fprintf(stderr,
                                 "FAIL frame=%d chain=%d res=%g theta=[%g %g %g %g] target=%g "
                                 "tension=%g obj=(%g,%g) v=(%g,%g) closed=%g wrist=(%g,%g)\n",
                                 frame, chain_index, sr.residual, ci.chain.theta[0], ci.chain.theta[1],
                                 ci.chain.theta[2], ci.chain.theta[3], ci.tendon_target, ci.tension,
                                 obj.pos.x(), obj.pos.y(), obj.vel.x(), obj.vel.y(), hk.closed,
                                 hk.wrist.x(), hk.wrist.y());
                }
                diag.all_converged = false;
                ++diag.nonconverged_frames;
                diag.frames = frame + 1;
                // dropped-object failure: abort with the current relative slip
                outcome.ground_collision = true;
                outcome.lifted = false;
                outcome.contact_at_end = false;
                outcome.force_feedback_nonzero = false;
                outcome.dq = (obj.pos - hk.wrist) - rel0;
                outcome.dq_y = outcome.dq.y();
                return outcome;
            }
            diag.max_residual = std::max(diag.max_residual, sr.residual);

            chain_joint_positions(ci, hk, joints);
            contacts.clear();
            collect_chain_contacts(ci, joints, obj, config, contacts);
            for (Contact c : contacts) {
                c.chain = chain_index;
                frame_contacts.push_back(c);
            }

            // track the closest approach for the end-of-rollout contact flag
            for (int link = 0; link < ci.chain.joints; ++link) {
                for (double t : kLinkSamples) {
                    const Vector2d probe = joints[link] + t * (joints[link + 1] - joints[link]);
                    const SurfaceHit hit = object_point_query(obj, probe);
                    final_min_gap = std::min(final_min_gap, hit.dist - ci.chain.capsule_radius[link]);
                }
            }
        }

        // -- forces on the object: elastic normal plus damping, friction
        //    demand split evenly over this frame's contacts --
        Vector2d force(0.0, -mass * config.gravity);
        double total_normal = 0.0;
        const double contact_damping =
            2.0 * config.contact_damping_ratio * std::sqrt(config.contact_stiffness * mass);
        const double friction_share =
            frame_contacts.empty() ? 1.0 : 1.0 / static_cast<double>(frame_contacts.size());
        for (const auto& c : frame_contacts) {
            const Vector2d v_finger = chain_point_velocity(chains[c.chain], hk);
            const Vector2d v_rel = obj.vel - v_finger;
            const double ramp = std::min(1.0, c.penetration / 2e-4);
            const double normal_force =
                std::max(0.0, c.elastic_force - contact_damping * v_rel.dot(c.normal) * ramp);
            const Vector2d tangent(-c.normal.y(), c.normal.x());
            const double demand = -v_rel.dot(tangent) * mass / config.dt * friction_share;
            const double tangent_force = friction_contact(normal_force, object.friction, demand);
            force += c.normal * normal_force + tangent * tangent_force;
            total_normal += normal_force;
        }
        const double bottom = obj.bottom();
        if (bottom < 0.0) {
            const double pen = -bottom;
            const double damping =
                2.0 * config.contact_damping_ratio * std::sqrt(config.ground_stiffness * mass);
            const double n_g = std::max(0.0, config.ground_stiffness * pen - damping * obj.vel.y());
            const double demand = -obj.vel.x() * mass / config.dt;
            force += Vector2d(friction_contact(n_g, object.friction, demand), n_g);
            if (lift_started && left_ground) outcome.ground_collision = true;
        }
        obj.vel += (config.dt / mass) * force;
        obj.pos += config.dt * obj.vel;

        if (obj.bottom() > 0.002) left_ground = true;
        final_total_normal = total_normal;
        diag.frames = frame + 1;
    }

    outcome.dq = (obj.pos - hk.wrist) - rel0;
    outcome.dq_y = outcome.dq.y();
    outcome.lifted = (obj.pos.y() - start_height) >= 0.5 * record.lift_height && record.lift_height > 0.0;
    outcome.contact_at_end = final_min_gap <= 1e-3;
    outcome.force_feedback_nonzero = final_total_normal > 1e-6;
    return outcome;
}

Bundle load_bundle(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    const fs::path manifest_path = root / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open bundle manifest: " + manifest_path.string());
    nlohmann::json manifest;
    in >> manifest;

    Bundle bundle;
    for (const auto& entry : manifest.at("objects")) {
        std::ifstream obj_in(root / entry.at("object").get<std::string>());
        if (!obj_in)
            throw std::runtime_error("cannot open object file: " + entry.at("object").get<std::string>());
        nlohmann::json oj;
        obj_in >> oj;
        bundle.objects.push_back(oj.get<SimObject>());

        std::vector<TeleopRecord> records;
        for (const auto& rel : entry.at("records")) {
            std::ifstream rec_in(root / rel.get<std::string>());
            if (!rec_in) throw std::runtime_error("cannot open record file: " + rel.get<std::string>());
            nlohmann::json rj;
            rec_in >> rj;
            records.push_back(rj.get<TeleopRecord>());
        }
        if (records.empty())
            throw std::runtime_error("bundle object has no records: " + bundle.objects.back().object_id);
        bundle.records.push_back(std::move(records));
    }
    if (bundle.objects.empty()) throw std::runtime_error("bundle is empty: " + dir);
    return bundle;
}

void to_json(nlohmann::json& j, const PlanarPose& p) {
    j = nlohmann::json{{"x", p.x}, {"y", p.y}, {"theta", p.theta}};
}

void from_json(const nlohmann::json& j, PlanarPose& p) {
    j.at("x").get_to(p.x);
    j.at("y").get_to(p.y);
    j.at("theta").get_to(p.theta);
}

void to_json(nlohmann::json& j, const TeleopRecord& r) {
    j = nlohmann::json{{"object_id", r.object_id},
                       {"grasp_pose", r.grasp_pose},
                       {"prismatic_displacement", r.prismatic_displacement},
                       {"tendon_targets", r.tendon_targets},
                       {"lift_height", r.lift_height}};
}

void from_json(const nlohmann::json& j, TeleopRecord& r) {
    j.at("object_id").get_to(r.object_id);
    j.at("grasp_pose").get_to(r.grasp_pose);
    j.at("prismatic_displacement").get_to(r.prismatic_displacement);
    j.at("tendon_targets").get_to(r.tendon_targets);
    j.at("lift_height").get_to(r.lift_height);
    if (r.prismatic_displacement < 0.0) throw std::runtime_error("record: negative prismatic displacement");
    for (double t : r.tendon_targets)
        if (t < 0.0) throw std::runtime_error("record: negative tendon target");
}

void to_json(nlohmann::json& j, const SimObject& o) {
    nlohmann::json shape;
    if (o.is_disc) {
        shape = nlohmann::json{{"type", "disc"}, {"radius", o.radius}};
    } else {
        nlohmann::json verts = nlohmann::json::array();
        for (const auto& v : o.vertices) verts.push_back({v.x(), v.y()});
        shape = nlohmann::json{{"type", "polygon"}, {"vertices", verts}};
    }
    j = nlohmann::json{{"object_id", o.object_id},
                       {"shape", shape},
                       {"mass", o.mass},
                       {"friction", o.friction},
                       {"density_class", o.density_class == DensityClass::light ? "light" : "heavy"}};
}

void from_json(const nlohmann::json& j, SimObject& o) {
    j.at("object_id").get_to(o.object_id);
    j.at("mass").get_to(o.mass);
    j.at("friction").get_to(o.friction);
    const auto cls = j.at("density_class").get<std::string>();
    if (cls == "light") {
        o.density_class = DensityClass::light;
    } else if (cls == "heavy") {
        o.density_class = DensityClass::heavy;
    } else {
        throw std::runtime_error("object: unknown density class '" + cls + "'");
    }
    const auto& shape = j.at("shape");
    const auto type = shape.at("type").get<std::string>();
    if (type == "disc") {
        o.is_disc = true;
        shape.at("radius").get_to(o.radius);
        o.vertices.clear();
    } else if (type == "polygon") {
        o.is_disc = false;
        o.vertices.clear();
        for (const auto& v : shape.at("vertices"))
            o.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
        if (o.vertices.size() < 3) throw std::runtime_error("object: polygon needs >= 3 vertices");
    } else {
        throw std::runtime_error("object: unknown shape type '" + type + "'");
    }
    if (o.mass <= 0.0) throw std::runtime_error("object: mass must be positive");
}

}  // namespace cemrm
