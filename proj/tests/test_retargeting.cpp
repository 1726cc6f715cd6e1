#include <doctest.h>

#include "cemrm/retargeting.hpp"
#include "cemrm/rng.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

using namespace cemrm;

namespace {

const std::string kDataDir = CEMRM_DATA_DIR;

HandFrame pose_frame(double t, const Eigen::Vector3d& wrist, const Eigen::Quaterniond& q) {
    HandFrame f;
    f.timestamp = t;
    f.keypoints["wrist"] = wrist;
    f.wrist_orientation = q;
    return f;
}

}  // namespace

TEST_CASE("bend angle from keypoints") {
    using V = Eigen::Vector3d;
    CHECK(bend_angle(V(2, 0, 0), V(1, 0, 0), V(0, 0, 0)) == doctest::Approx(0.0).scale(1).epsilon(1e-12));
    CHECK(bend_angle(V(1, 1, 0), V(1, 0, 0), V(0, 0, 0)) ==
          doctest::Approx(std::numbers::pi / 2.0).epsilon(1e-12));
    CHECK(bend_angle(V(0, 0, 0) + V(-1, 0, 0), V(0, 0, 0), V(-1, 0, 0)) ==
          doctest::Approx(std::numbers::pi).epsilon(1e-9));  // antiparallel fold
    CHECK_THROWS_AS((void)bend_angle(V(1, 0, 0), V(1, 0, 0), V(0, 0, 0)), std::invalid_argument);
}

TEST_CASE("bend angle is invariant under rigid motion") {
    using V = Eigen::Vector3d;
    Rng rng(31);
    const V tip(0.33, 0.1, -0.2), distal(0.3, 0.05, -0.18), proximal(0.28, 0.01, -0.15);
    const double reference = bend_angle(tip, distal, proximal);
    for (int i = 0; i < 20; ++i) {
        const Eigen::Quaterniond q = Eigen::Quaterniond(Eigen::AngleAxisd(
            rng.uniform(-3, 3), V(rng.normal(), rng.normal(), rng.normal()).normalized()));
        const V shift(rng.normal(), rng.normal(), rng.normal());
        CHECK(bend_angle(q * tip + shift, q * distal + shift, q * proximal + shift) ==
              doctest::Approx(reference).epsilon(1e-9));
    }
}

TEST_CASE("pulley displacement is the radius-angle product") {
    CHECK(pulley_displacement(2.0, 0.005) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(pulley_displacement(0.0, 0.02) == 0.0);
    CHECK(pulley_displacement(std::numbers::pi, 0.01) ==
          doctest::Approx(0.031415926535897934).epsilon(1e-12));
    CHECK(pulley_displacement(-1.0, 0.01) == doctest::Approx(-0.01));  // linear in both arguments
    CHECK_THROWS_AS((void)pulley_displacement(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("slerp endpoints, midpoint and arc speed") {
    const Eigen::Quaterniond q0 = Eigen::Quaterniond::Identity();
    const Eigen::Quaterniond q1(Eigen::AngleAxisd(std::numbers::pi / 2.0, Eigen::Vector3d::UnitZ()));

    CHECK(slerp(q0, q1, 0.0).angularDistance(q0) < 1e-12);
    CHECK(slerp(q0, q1, 1.0).angularDistance(q1) < 1e-12);

    const Eigen::Quaterniond mid = slerp(q0, q1, 0.5);
    const Eigen::Quaterniond expected(Eigen::AngleAxisd(std::numbers::pi / 4.0, Eigen::Vector3d::UnitZ()));
    CHECK(mid.angularDistance(expected) < 1e-12);

    SUBCASE("constant angular velocity") {
        const double full = q0.angularDistance(q1);
        for (double t : {0.1, 0.25, 0.6, 0.9}) {
            CHECK(q0.angularDistance(slerp(q0, q1, t)) == doctest::Approx(t * full).epsilon(1e-9));
        }
    }

    SUBCASE("unit norm for random inputs") {
        Rng rng(12);
        for (int i = 0; i < 50; ++i) {
            Eigen::Quaterniond a(rng.normal(), rng.normal(), rng.normal(), rng.normal());
            Eigen::Quaterniond b(rng.normal(), rng.normal(), rng.normal(), rng.normal());
            a.normalize();
            b.normalize();
            CHECK(slerp(a, b, rng.uniform01()).norm() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    SUBCASE("non-unit input is rejected") {
        Eigen::Quaterniond bad(2.0, 0.0, 0.0, 0.0);
        CHECK_THROWS_AS((void)slerp(bad, q1, 0.5), std::invalid_argument);
    }
}

TEST_CASE("delta pose stream") {
    const Eigen::Quaterniond identity = Eigen::Quaterniond::Identity();

    SUBCASE("constant pose gives identity deltas") {
        std::vector<HandFrame> frames;
        for (int i = 0; i < 5; ++i)
            frames.push_back(pose_frame(0.1 * i, Eigen::Vector3d(0.2, 0.3, 0.4), identity));
        const auto deltas = delta_pose_stream(frames, {});
        CHECK(deltas.size() == 4);
        for (const auto& d : deltas) {
            CHECK(d.translation.norm() < 1e-12);
            CHECK(d.rotation.angularDistance(identity) < 1e-12);
        }
    }

    SUBCASE("a jump is split into bounded interpolated sub-steps") {
        std::vector<HandFrame> frames;
        frames.push_back(pose_frame(0.0, Eigen::Vector3d::Zero(), identity));
        frames.push_back(pose_frame(0.1, Eigen::Vector3d(0.5, 0.0, 0.0), identity));
        JumpTolerance tolerance;
        tolerance.translation = 0.05;
        const auto deltas = delta_pose_stream(frames, tolerance);
        CHECK(deltas.size() == 10);  // ceil(0.5 / 0.05)
        for (const auto& d : deltas) CHECK(d.translation.norm() <= 0.05 + 1e-12);
    }

    SUBCASE("composition reproduces the final pose on a smooth stream") {
        Rng rng(6);
        std::vector<HandFrame> frames;
        Eigen::Vector3d p(0.1, 0.2, 0.3);
        Eigen::Quaterniond q = identity;
        for (int i = 0; i < 30; ++i) {
            frames.push_back(pose_frame(0.05 * i, p, q));
            p += Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 0.004;
            q = q * Eigen::Quaterniond(Eigen::AngleAxisd(
                        0.02, Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized()));
            q.normalize();
        }
        const auto deltas = delta_pose_stream(frames, {});
        Eigen::Vector3d cp = frames.front().keypoints.at("wrist");
        Eigen::Quaterniond cq = frames.front().wrist_orientation;
        for (const auto& d : deltas) {
            cp = cp + cq * d.translation;
            cq = cq * d.rotation;
            cq.normalize();
        }
        CHECK((cp - frames.back().keypoints.at("wrist")).norm() < 1e-6);
        CHECK(cq.angularDistance(frames.back().wrist_orientation) < 1e-6);
    }
}

TEST_CASE("pinch maps to the prismatic joint with clamping") {
    using V = Eigen::Vector3d;
    CHECK(pinch_to_prismatic(V(0.1, 0.2, 0.3), V(0.1, 0.2, 0.3), 1.0) == 0.0);
    CHECK(pinch_to_prismatic(V(0.08, 0, 0), V(0, 0, 0), 1.0, 0.06) == 0.06);
    CHECK(pinch_to_prismatic(V(0.04, 0, 0), V(0, 0, 0), 0.5, 0.06) == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("compile_record reduces a stream") {
    RetargetCalibration calibration;
    calibration.object_id = "disc_small_light";
    calibration.object_position = Eigen::Vector3d(0.4, 0.1, 0.1);
    calibration.tendon_ds_max = 0.012;

    auto straight_frame = [&](double t, double wrist_y, bool grasp) {
        HandFrame f = pose_frame(t, Eigen::Vector3d(0.45, wrist_y, 0.1), Eigen::Quaterniond::Identity());
        const char* names[3] = {"thumb", "index", "middle"};
        const Eigen::Vector3d dirs[3] = {Eigen::Vector3d(-0.25, -1, 0).normalized(),
                                         Eigen::Vector3d(0.25, -1, 0).normalized(),
                                         Eigen::Vector3d(0, -1, 0)};
        for (int i = 0; i < 3; ++i) {
            // collinear keypoints along each bone: zero bend, tips still apart
            const Eigen::Vector3d proximal = f.keypoints["wrist"] + Eigen::Vector3d(0.01 * i, -0.02, 0);
            f.keypoints[std::string(names[i]) + "_proximal"] = proximal;
            f.keypoints[std::string(names[i]) + "_distal"] = proximal + dirs[i] * 0.035;
            f.keypoints[std::string(names[i]) + "_tip"] = proximal + dirs[i] * 0.065;
        }
        f.grasp_event = grasp;
        return f;
    };

    SUBCASE("straight fingers produce zero tendon targets") {
        std::vector<HandFrame> frames{straight_frame(0.0, 0.2, false), straight_frame(0.1, 0.2, true),
                                      straight_frame(0.2, 0.2, false)};
        const TeleopRecord record = compile_record(frames, calibration);
        for (int i = 0; i < 3; ++i)
            CHECK(record.tendon_targets[i] == doctest::Approx(0.0).scale(1).epsilon(1e-9));
        CHECK(record.lift_height == doctest::Approx(0.0).scale(1).epsilon(1e-12));
        CHECK(record.object_id == "disc_small_light");
    }

    SUBCASE("lift height tracks post-grasp wrist travel") {
        std::vector<HandFrame> frames{straight_frame(0.0, 0.2, true), straight_frame(0.1, 0.26, false),
                                      straight_frame(0.2, 0.23, false)};
        const TeleopRecord record = compile_record(frames, calibration);
        CHECK(record.lift_height == doctest::Approx(0.06).epsilon(1e-9));
    }

    SUBCASE("missing grasp marker is rejected") {
        std::vector<HandFrame> frames{straight_frame(0.0, 0.2, false), straight_frame(0.1, 0.2, false)};
        CHECK_THROWS_AS((void)compile_record(frames, calibration), std::invalid_argument);
    }
}

TEST_CASE("bundled sample stream compiles to the golden record") {
    const auto frames = load_stream(kDataDir + "/streams/sample_grasp.jsonl");
    const auto calibration = load_calibration(kDataDir + "/streams/sample_calibration.json");
    const TeleopRecord record = compile_record(frames, calibration);

    std::ifstream golden_in(kDataDir + "/golden/sample_record.json");
    REQUIRE(golden_in.good());
    nlohmann::json gj;
    golden_in >> gj;
    const TeleopRecord golden = gj.get<TeleopRecord>();

    CHECK(record.object_id == golden.object_id);
    CHECK(record.grasp_pose.x == golden.grasp_pose.x);
    CHECK(record.grasp_pose.y == golden.grasp_pose.y);
    CHECK(record.grasp_pose.theta == golden.grasp_pose.theta);
    CHECK(record.prismatic_displacement == golden.prismatic_displacement);
    for (int i = 0; i < 3; ++i) CHECK(record.tendon_targets[i] == golden.tendon_targets[i]);
    CHECK(record.lift_height == golden.lift_height);
}

TEST_CASE("malformed stream lines are rejected with their line number") {
    const std::string path = "/tmp/cemrm_bad_stream.jsonl";
    {
        std::ofstream out(path);
        out << R"({"t":0.0,"keypoints":{"wrist":[0,0,0]},"wrist_quat":[1,0,0,0]})" << "\n";
        out << "this is not json\n";
    }
    try {
        (void)load_stream(path);
        CHECK(false);
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}
