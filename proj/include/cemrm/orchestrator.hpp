#pragma once

#include <Eigen/Core>

#include <json.hpp>

#include "cemrm/benchmarks.hpp"
#include "cemrm/cem.hpp"
#include "cemrm/design_space.hpp"
#include "cemrm/objective.hpp"
#include "cemrm/reward_model.hpp"
#include "cemrm/scheduler.hpp"
#include "cemrm/surrogate.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cemrm {

enum class CampaignMode { pure_cem, hybrid, rho_one, random_search };
enum class TeleopMode { single, multi };

std::string to_string(CampaignMode mode);
CampaignMode campaign_mode_from_string(const std::string& name);

struct ScheduleConfig {
    double rho_min = 0.1;
    double rho_max = 0.7;
    double eta = 0.9;
    int ramp_iterations = 100;
};

struct RewardModelTraining {
    double learning_rate = 1e-3;
    int batch_size = 64;
    std::vector<int> hidden{64, 64};
    int train_epochs = 1;  // train steps per iteration (study knob)
    std::size_t buffer_capacity = 100000;
};

struct BenchmarkEvaluatorConfig {
    std::string name = "sphere";
    int dimension = 36;
};

struct SurrogateEvaluatorConfig {
    std::string bundle_dir;
    TeleopMode teleop_mode = TeleopMode::multi;
    int segment_count = 4;
    double mount_radius = 40.0;      // mm
    std::string base_design_path;    // empty = uniform baseline
    PhaseConfig phase;
};

struct CampaignConfig {
    int population = 45;   // K
    int elites = 7;        // N_e
    int iterations = 100;  // J
    double sigma0 = 0.5;   // initial per-coordinate spread, normalized action units
    double sigma_floor = 1e-6;
    bool per_dimension_sigma = false;
    CampaignMode mode = CampaignMode::hybrid;
    std::uint64_t seed = 0;
    ScheduleConfig schedule;
    RewardModelTraining reward_model;
    RewardWeights weights;
    bool elites_ground_truth_only = false;
    bool wall_clock_in_log = false;  // off by default so logs are reproducible
    std::string evaluator_kind = "benchmark";
    BenchmarkEvaluatorConfig benchmark;
    SurrogateEvaluatorConfig surrogate;
};

nlohmann::json campaign_config_to_json(const CampaignConfig& config);
CampaignConfig campaign_config_from_json(const nlohmann::json& j);
// Strict load: unknown keys are errors, referenced files must exist.
CampaignConfig load_campaign_config(const std::string& path);

struct IterationLog {
    int iter = 0;
    long long env_interactions = 0;  // cumulative ground-truth rollout count
    double elite_mean = 0.0;
    double elite_max = 0.0;
    std::optional<double> rm_loss;
    double rho = 0.0;
    double sigma = 0.0;
    double wall_s = 0.0;
    // mean over the ground-truth-scored members of the elite set (NaN when
    // every elite was model-scored); not part of the CSV, kept for audits
    double elite_gt_mean = std::numeric_limits<double>::quiet_NaN();
};

// Ground-truth scorer behind the campaign: either a benchmark surface or the
// planar surrogate over a record bundle.
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual int dimension() const = 0;
    virtual int interactions_per_candidate() const = 0;
    virtual double ground_truth(const Eigen::VectorXd& action, std::uint64_t seed) const = 0;
    virtual std::optional<DesignVector> to_design(const Eigen::VectorXd&) const {
        return std::nullopt;
    }
};

std::unique_ptr<Evaluator> make_evaluator(const CampaignConfig& config);

// Mean reward of one design over the bundle's object set; in multi-teleop
// mode each object's record is drawn uniformly (seeded), in single-teleop
// mode record 0 is pinned.
double evaluate_candidate(const DesignVector& design, const Bundle& bundle, TeleopMode teleop_mode,
                          const RewardWeights& weights, const PhaseConfig& phase, std::uint64_t seed);

struct CampaignState {
    CampaignConfig config;
    int next_iteration = 1;  // 1-based
    GaussianSearchState search;
    RateSchedule schedule;
    ReplayBuffer buffer;
    RewardModel model;
    bool model_trained = false;
    long long env_interactions = 0;
    long long ground_truth_candidates = 0;
    bool has_best = false;
    Eigen::VectorXd best_action;
    double best_reward = -std::numeric_limits<double>::infinity();
    std::vector<IterationLog> log;
};

struct CampaignResult {
    Eigen::VectorXd final_action;  // s* = s0 + mu_J in normalized action units
    Eigen::VectorXd best_action;   // best ground-truth-evaluated action seen
    double best_reward = -std::numeric_limits<double>::infinity();
    std::vector<IterationLog> log;
    long long env_interactions = 0;
    long long ground_truth_candidates = 0;
    std::uint64_t buffer_total_appended = 0;
    GaussianSearchState final_state;
};

CampaignState init_campaign(const CampaignConfig& config);
void campaign_iteration(CampaignState& state, const Evaluator& evaluator);
CampaignResult campaign_result(const CampaignState& state);

// Runs the full loop; when checkpoint_path is set, a checkpoint is written
// every checkpoint_every iterations (and always at the end).
CampaignResult run_campaign(const CampaignConfig& config, const std::string& checkpoint_path = "",
                            int checkpoint_every = 0);
CampaignResult resume_campaign(const std::string& checkpoint_path, int override_iterations = 0,
                               const std::string& new_checkpoint_path = "", int checkpoint_every = 0);

void save_checkpoint(const std::string& path, const CampaignState& state);
CampaignState load_checkpoint(const std::string& path);

// CSV with the fixed header iter,env_interactions,elite_mean,elite_max,
// rm_loss,rho,sigma,wall_s. wall_s is written as 0 unless wall_clock is set,
// so identical runs produce byte-identical files.
std::string log_csv_text(const std::vector<IterationLog>& log, bool wall_clock);
void write_log_csv(const std::string& path, const std::vector<IterationLog>& log, bool wall_clock);

int evaluation_threads();  // CEMRM_THREADS, 0/unset = hardware concurrency

}  // namespace cemrm
