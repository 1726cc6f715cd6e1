#pragma once

#include <Eigen/Core>

#include <json.hpp>

#include <vector>

namespace cemrm {

// Raw result of one design-on-one-object rollout. dq is the displacement of
// the object's end pose relative to the wrist, dq_y its vertical component
// (positive up).
struct EvalOutcome {
    Eigen::Vector2d dq{0.0, 0.0};  // m
    double dq_y = 0.0;             // m, == dq.y()
    bool ground_collision = false;
    bool design_valid = true;
    bool contact_at_end = false;
    bool force_feedback_nonzero = false;
    bool lifted = false;
};

struct RewardWeights {
    double w1 = -1.0;
    double w2 = -1.0;
    double collision_reward = 0.0;
    double offset = 0.0;             // added on the non-zeroed branch only
    bool zero_on_collision = true;   // when off, the -I term applies instead
};

// Scalar training reward over the outcomes of one design on an object set:
// 0 for invalid designs, collision_reward when any outcome hit the ground
// (zeroing rule), otherwise w1 * sum ||dq|| + w2 * sum |min(dq_y, 0)|.
double design_reward(const std::vector<EvalOutcome>& outcomes, const RewardWeights& weights);

// Test-time success predicate: lifted, no ground collision, contact kept and
// non-zero force feedback at the final frame.
bool grasp_success(const EvalOutcome& outcome);

// outcome lists are dumpable to JSON for audits
void to_json(nlohmann::json& j, const EvalOutcome& o);
void from_json(const nlohmann::json& j, EvalOutcome& o);

}  // namespace cemrm
