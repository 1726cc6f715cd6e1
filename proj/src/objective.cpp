#include "cemrm/objective.hpp"

#include <algorithm>
#include <stdexcept>

namespace cemrm {

double design_reward(const std::vector<EvalOutcome>& outcomes, const RewardWeights& weights) {
    if (outcomes.empty()) throw std::invalid_argument("design_reward: empty outcome list");

    bool any_collision = false;
    for (const auto& o : outcomes) {
        if (!o.design_valid) return 0.0;
        any_collision = any_collision || o.ground_collision;
    }
    if (any_collision && weights.zero_on_collision) return weights.collision_reward;

    double slip = 0.0;
    double sag = 0.0;
    for (const auto& o : outcomes) {
        slip += o.dq.norm();
        sag += std::abs(std::min(o.dq_y, 0.0));
    }
    double reward = weights.w1 * slip + weights.w2 * sag + weights.offset;
    if (!weights.zero_on_collision && any_collision) reward -= 1.0;
    return reward;
}

bool grasp_success(const EvalOutcome& outcome) {
    return outcome.lifted && !outcome.ground_collision && outcome.contact_at_end &&
           outcome.force_feedback_nonzero;
}


void to_json(nlohmann::json& j, const EvalOutcome& o) {
    j = nlohmann::json{{"dq", {o.dq.x(), o.dq.y()}},
                       {"dq_y", o.dq_y},
                       {"ground_collision", o.ground_collision},
                       {"design_valid", o.design_valid},
                       {"contact_at_end", o.contact_at_end},
                       {"force_feedback_nonzero", o.force_feedback_nonzero},
                       {"lifted", o.lifted}};
}

void from_json(const nlohmann::json& j, EvalOutcome& o) {
    const auto dq = j.at("dq").get<std::vector<double>>();
    o.dq = Eigen::Vector2d(dq.at(0), dq.at(1));
    j.at("dq_y").get_to(o.dq_y);
    j.at("ground_collision").get_to(o.ground_collision);
    j.at("design_valid").get_to(o.design_valid);
    j.at("contact_at_end").get_to(o.contact_at_end);
    j.at("force_feedback_nonzero").get_to(o.force_feedback_nonzero);
    j.at("lifted").get_to(o.lifted);
}

}  // namespace cemrm
