#pragma once

#include "cemrm/orchestrator.hpp"

#include <string>
#include <vector>

namespace cemrm {

// One (mode, seed) campaign summarized for the four-way comparison. The final
// quality is re-scored by ground truth so model-scored logs cannot flatter a
// mode; normalized_final rescales it as the fraction of pure CEM's
// improvement over the shared starting reward.
struct ModeRunStats {
    CampaignMode mode = CampaignMode::hybrid;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string failure;
    double initial_elite_mean = 0.0;
    double final_elite_mean = 0.0;
    double final_true_reward = 0.0;
    long long total_env_interactions = 0;
    long long env_to_threshold = -1;  // -1 when the threshold was never reached
    double normalized_final = 0.0;
    double threshold = 0.0;
};

struct CompareReport {
    std::vector<ModeRunStats> runs;
};

// Runs pure-cem, hybrid, rho1 and random for every seed over the base config.
// The per-seed threshold is 95% of pure CEM's improvement from its first
// elite mean to its final ground-truth reward.
CompareReport run_compare(const CampaignConfig& base, const std::vector<std::uint64_t>& seeds);

std::vector<const ModeRunStats*> runs_for_mode(const CompareReport& report, CampaignMode mode);
double median(std::vector<double> values);

std::string compare_csv_text(const CompareReport& report);
std::string compare_summary_text(const CompareReport& report);

}  // namespace cemrm
