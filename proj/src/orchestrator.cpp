#include "cemrm/orchestrator.hpp"

#include "cemrm/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace cemrm {

std::string to_string(CampaignMode mode) {
    switch (mode) {
        case CampaignMode::pure_cem: return "pure-cem";
        case CampaignMode::hybrid: return "hybrid";
        case CampaignMode::rho_one: return "rho1";
        case CampaignMode::random_search: return "random";
    }
    return "hybrid";
}

CampaignMode campaign_mode_from_string(const std::string& name) {
    if (name == "pure-cem") return CampaignMode::pure_cem;
    if (name == "hybrid") return CampaignMode::hybrid;
    if (name == "rho1") return CampaignMode::rho_one;
    if (name == "random") return CampaignMode::random_search;
    throw std::runtime_error("unknown campaign mode '" + name + "'");
}

namespace {

void expect_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                 const std::string& context) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || item.key() == k;
        if (!ok) throw std::runtime_error("unknown key '" + item.key() + "' in " + context);
    }
}

nlohmann::json phase_to_json(const PhaseConfig& p) {
    return {{"dt", p.dt},
            {"grasp_frame_cap", p.grasp_frame_cap},
            {"test_frames", p.test_frames},
            {"disturbance", p.disturbance},
            {"impulse_min", p.impulse_min},
            {"impulse_max", p.impulse_max},
            {"prismatic_accel", p.prismatic_accel},
            {"lift_accel", p.lift_accel},
            {"tendon_force", p.tendon_force},
            {"tendon_band", p.tendon_band},
            {"prismatic_travel", p.prismatic_travel},
            {"contact_stiffness", p.contact_stiffness},
            {"contact_damping_ratio", p.contact_damping_ratio},
            {"ground_stiffness", p.ground_stiffness},
            {"joint_limit", p.joint_limit},
            {"flexure_width", p.flexure_width},
            {"flexure_thickness", p.flexure_thickness},
            {"youngs_modulus", p.youngs_modulus},
            {"gravity", p.gravity},
            {"equilibrium",
             {{"max_iterations", p.equilibrium.max_iterations},
              {"tolerance", p.equilibrium.tolerance},
              {"damping", p.equilibrium.damping}}}};
}

PhaseConfig phase_from_json(const nlohmann::json& j) {
    expect_keys(j,
                {"dt", "grasp_frame_cap", "test_frames", "disturbance", "impulse_min", "impulse_max",
                 "prismatic_accel", "lift_accel", "tendon_force", "tendon_band", "prismatic_travel",
                 "contact_stiffness", "contact_damping_ratio", "ground_stiffness", "joint_limit",
                 "flexure_width", "flexure_thickness", "youngs_modulus", "gravity", "equilibrium"},
                "evaluator.phase");
    PhaseConfig p;
    p.dt = j.value("dt", p.dt);
    p.grasp_frame_cap = j.value("grasp_frame_cap", p.grasp_frame_cap);
    p.test_frames = j.value("test_frames", p.test_frames);
    p.disturbance = j.value("disturbance", p.disturbance);
    p.impulse_min = j.value("impulse_min", p.impulse_min);
    p.impulse_max = j.value("impulse_max", p.impulse_max);
    p.prismatic_accel = j.value("prismatic_accel", p.prismatic_accel);
    p.lift_accel = j.value("lift_accel", p.lift_accel);
    p.tendon_force = j.value("tendon_force", p.tendon_force);
    p.tendon_band = j.value("tendon_band", p.tendon_band);
    p.prismatic_travel = j.value("prismatic_travel", p.prismatic_travel);
    p.contact_stiffness = j.value("contact_stiffness", p.contact_stiffness);
    p.contact_damping_ratio = j.value("contact_damping_ratio", p.contact_damping_ratio);
    p.ground_stiffness = j.value("ground_stiffness", p.ground_stiffness);
    p.joint_limit = j.value("joint_limit", p.joint_limit);
    p.flexure_width = j.value("flexure_width", p.flexure_width);
    p.flexure_thickness = j.value("flexure_thickness", p.flexure_thickness);
    p.youngs_modulus = j.value("youngs_modulus", p.youngs_modulus);
    p.gravity = j.value("gravity", p.gravity);
    if (j.contains("equilibrium")) {
        const auto& e = j.at("equilibrium");
        expect_keys(e, {"max_iterations", "tolerance", "damping"}, "evaluator.phase.equilibrium");
        p.equilibrium.max_iterations = e.value("max_iterations", p.equilibrium.max_iterations);
        p.equilibrium.tolerance = e.value("tolerance", p.equilibrium.tolerance);
        p.equilibrium.damping = e.value("damping", p.equilibrium.damping);
    }
    return p;
}

GaussianSearchState initial_state(const CampaignConfig& cfg, int dimension) {
    GaussianSearchState s;
    s.mu = Eigen::VectorXd::Zero(dimension);
    // config sigma0 is the per-coordinate spread; the isotropic scalar is an
    // RMS radius, hence the sqrt(d) conversion
    s.sigma = cfg.sigma0 * std::sqrt(static_cast<double>(dimension));
    if (cfg.per_dimension_sigma) s.sigma_per_dim = Eigen::VectorXd::Constant(dimension, cfg.sigma0);
    s.iteration = 0;
    return s;
}

class BenchmarkEvaluator final : public Evaluator {
public:
    explicit BenchmarkEvaluator(const BenchmarkEvaluatorConfig& cfg)
        : objective_(make_benchmark(cfg.name, cfg.dimension)) {}
    int dimension() const override { return objective_.dimension; }
    int interactions_per_candidate() const override { return 1; }
    double ground_truth(const Eigen::VectorXd& action, std::uint64_t) const override {
        return objective_.reward(action);
    }

private:
    BenchmarkObjective objective_;
};

class SurrogateEvaluator final : public Evaluator {
public:
    explicit SurrogateEvaluator(const SurrogateEvaluatorConfig& cfg, const RewardWeights& weights)
        : config_(cfg), weights_(weights), bundle_(load_bundle(cfg.bundle_dir)) {
        base_ = cfg.base_design_path.empty() ? uniform_baseline(cfg.segment_count, cfg.mount_radius)
                                             : load_design(cfg.base_design_path);
    }
    int dimension() const override { return base_.dimension(); }
    int interactions_per_candidate() const override { return static_cast<int>(bundle_.objects.size()); }
    double ground_truth(const Eigen::VectorXd& action, std::uint64_t seed) const override {
        return evaluate_candidate(to_design_value(action), bundle_, config_.teleop_mode, weights_,
                                  config_.phase, seed);
    }
    std::optional<DesignVector> to_design(const Eigen::VectorXd& action) const override {
        return to_design_value(action);
    }
    const Bundle& bundle() const { return bundle_; }
    const DesignVector& base_design() const { return base_; }

private:
    DesignVector to_design_value(const Eigen::VectorXd& action) const {
        return apply_action(base_, action);
    }
    SurrogateEvaluatorConfig config_;
    RewardWeights weights_;
    Bundle bundle_;
    DesignVector base_;
};

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace

nlohmann::json campaign_config_to_json(const CampaignConfig& c) {
    nlohmann::json evaluator;
    if (c.evaluator_kind == "benchmark") {
        evaluator = {{"kind", "benchmark"}, {"name", c.benchmark.name}, {"dimension", c.benchmark.dimension}};
    } else {
        evaluator = {{"kind", "surrogate"},
                     {"bundle", c.surrogate.bundle_dir},
                     {"teleop_mode", c.surrogate.teleop_mode == TeleopMode::multi ? "multi" : "single"},
                     {"segment_count", c.surrogate.segment_count},
                     {"mount_radius_mm", c.surrogate.mount_radius},
                     {"base_design", c.surrogate.base_design_path},
                     {"phase", phase_to_json(c.surrogate.phase)}};
    }
    return {{"schema_version", 1},
            {"mode", to_string(c.mode)},
            {"seed", c.seed},
            {"population", c.population},
            {"elites", c.elites},
            {"iterations", c.iterations},
            {"sigma0", c.sigma0},
            {"sigma_floor", c.sigma_floor},
            {"per_dimension_sigma", c.per_dimension_sigma},
            {"elites_ground_truth_only", c.elites_ground_truth_only},
            {"wall_clock_in_log", c.wall_clock_in_log},
            {"schedule",
             {{"rho_min", c.schedule.rho_min},
              {"rho_max", c.schedule.rho_max},
              {"eta", c.schedule.eta},
              {"ramp_iterations", c.schedule.ramp_iterations}}},
            {"reward_model",
             {{"learning_rate", c.reward_model.learning_rate},
              {"batch_size", c.reward_model.batch_size},
              {"hidden", c.reward_model.hidden},
              {"train_epochs", c.reward_model.train_epochs},
              {"buffer_capacity", c.reward_model.buffer_capacity}}},
            {"weights",
             {{"w1", c.weights.w1},
              {"w2", c.weights.w2},
              {"collision_reward", c.weights.collision_reward},
              {"offset", c.weights.offset},
              {"zero_on_collision", c.weights.zero_on_collision}}},
            {"evaluator", evaluator}};
}

CampaignConfig campaign_config_from_json(const nlohmann::json& j) {
    expect_keys(j,
                {"schema_version", "mode", "seed", "population", "elites", "iterations", "sigma0",
                 "sigma_floor", "per_dimension_sigma", "elites_ground_truth_only", "wall_clock_in_log",
                 "schedule", "reward_model", "weights", "evaluator"},
                "config");
    if (j.value("schema_version", 1) != 1) throw std::runtime_error("unsupported config schema_version");

    CampaignConfig c;
    c.mode = campaign_mode_from_string(j.value("mode", std::string("hybrid")));
    c.seed = j.value("seed", std::uint64_t{0});
    c.population = j.value("population", c.population);
    c.elites = j.value("elites", c.elites);
    c.iterations = j.value("iterations", c.iterations);
    c.sigma0 = j.value("sigma0", c.sigma0);
    c.sigma_floor = j.value("sigma_floor", c.sigma_floor);
    c.per_dimension_sigma = j.value("per_dimension_sigma", c.per_dimension_sigma);
    c.elites_ground_truth_only = j.value("elites_ground_truth_only", c.elites_ground_truth_only);
    c.wall_clock_in_log = j.value("wall_clock_in_log", c.wall_clock_in_log);

    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        expect_keys(s, {"rho_min", "rho_max", "eta", "ramp_iterations"}, "schedule");
        c.schedule.rho_min = s.value("rho_min", c.schedule.rho_min);
        c.schedule.rho_max = s.value("rho_max", c.schedule.rho_max);
        c.schedule.eta = s.value("eta", c.schedule.eta);
        c.schedule.ramp_iterations = s.value("ramp_iterations", c.schedule.ramp_iterations);
    }
    if (j.contains("reward_model")) {
        const auto& r = j.at("reward_model");
        expect_keys(r, {"learning_rate", "batch_size", "hidden", "train_epochs", "buffer_capacity"},
                    "reward_model");
        c.reward_model.learning_rate = r.value("learning_rate", c.reward_model.learning_rate);
        c.reward_model.batch_size = r.value("batch_size", c.reward_model.batch_size);
        c.reward_model.hidden = r.value("hidden", c.reward_model.hidden);
        c.reward_model.train_epochs = r.value("train_epochs", c.reward_model.train_epochs);
        c.reward_model.buffer_capacity = r.value("buffer_capacity", c.reward_model.buffer_capacity);
    }
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        expect_keys(w, {"w1", "w2", "collision_reward", "offset", "zero_on_collision"}, "weights");
        c.weights.w1 = w.value("w1", c.weights.w1);
        c.weights.w2 = w.value("w2", c.weights.w2);
        c.weights.collision_reward = w.value("collision_reward", c.weights.collision_reward);
        c.weights.offset = w.value("offset", c.weights.offset);
        c.weights.zero_on_collision = w.value("zero_on_collision", c.weights.zero_on_collision);
    }

    if (!j.contains("evaluator")) throw std::runtime_error("config is missing 'evaluator'");
    const auto& e = j.at("evaluator");
    c.evaluator_kind = e.at("kind").get<std::string>();
    if (c.evaluator_kind == "benchmark") {
        expect_keys(e, {"kind", "name", "dimension"}, "evaluator");
        c.benchmark.name = e.value("name", c.benchmark.name);
        c.benchmark.dimension = e.value("dimension", c.benchmark.dimension);
    } else if (c.evaluator_kind == "surrogate") {
        expect_keys(e,
                    {"kind", "bundle", "teleop_mode", "segment_count", "mount_radius_mm", "base_design",
                     "phase"},
                    "evaluator");
        c.surrogate.bundle_dir = e.at("bundle").get<std::string>();
        const auto teleop = e.value("teleop_mode", std::string("multi"));
        if (teleop == "multi") {
            c.surrogate.teleop_mode = TeleopMode::multi;
        } else if (teleop == "single") {
            c.surrogate.teleop_mode = TeleopMode::single;
        } else {
            throw std::runtime_error("unknown teleop_mode '" + teleop + "'");
        }
        c.surrogate.segment_count = e.value("segment_count", c.surrogate.segment_count);
        c.surrogate.mount_radius = e.value("mount_radius_mm", c.surrogate.mount_radius);
        c.surrogate.base_design_path = e.value("base_design", c.surrogate.base_design_path);
        if (e.contains("phase")) c.surrogate.phase = phase_from_json(e.at("phase"));
    } else {
        throw std::runtime_error("unknown evaluator kind '" + c.evaluator_kind + "'");
    }

    if (c.population < c.elites || c.elites < 2)
        throw std::runtime_error("config requires population >= elites >= 2");
    if (c.iterations < 1) throw std::runtime_error("config requires iterations >= 1");
    return c;
}

CampaignConfig load_campaign_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("config parse error in " + path + ": " + e.what());
    }
    CampaignConfig c = campaign_config_from_json(j);
    if (c.evaluator_kind == "surrogate") {
        namespace fs = std::filesystem;
        if (!fs::exists(fs::path(c.surrogate.bundle_dir) / "manifest.json"))
            throw std::runtime_error("config references missing bundle: " + c.surrogate.bundle_dir);
        if (!c.surrogate.base_design_path.empty() && !fs::exists(c.surrogate.base_design_path))
            throw std::runtime_error("config references missing base design: " +
                                     c.surrogate.base_design_path);
    }
    return c;
}

std::unique_ptr<Evaluator> make_evaluator(const CampaignConfig& config) {
    if (config.evaluator_kind == "benchmark")
        return std::make_unique<BenchmarkEvaluator>(config.benchmark);
    return std::make_unique<SurrogateEvaluator>(config.surrogate, config.weights);
}

double evaluate_candidate(const DesignVector& design, const Bundle& bundle, TeleopMode teleop_mode,
                          const RewardWeights& weights, const PhaseConfig& phase, std::uint64_t seed) {
    if (!validate(design).valid) return 0.0;  // zeroing rule, no rollouts spent

    std::vector<EvalOutcome> outcomes;
    outcomes.reserve(bundle.objects.size());
    for (std::size_t i = 0; i < bundle.objects.size(); ++i) {
        std::size_t record_index = 0;
        if (teleop_mode == TeleopMode::multi && bundle.records[i].size() > 1) {
            Rng rng(derive_seed(seed, Stream::record_choice, i));
            record_index = rng.bounded(bundle.records[i].size());
        }
        PhaseConfig run_phase = phase;
        run_phase.seed = derive_seed(seed, Stream::impulse, i);
        outcomes.push_back(rollout(design, bundle.records[i][record_index], bundle.objects[i], run_phase));
    }
    return design_reward(outcomes, weights) / static_cast<double>(outcomes.size());
}

int evaluation_threads() {
    if (const char* env = std::getenv("CEMRM_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

CampaignState init_campaign(const CampaignConfig& config) {
    CampaignState state;
    state.config = config;
    const auto evaluator = make_evaluator(config);
    const int d = evaluator->dimension();
    state.search = initial_state(config, d);
    state.schedule.rho_min = config.schedule.rho_min;
    state.schedule.rho_max = config.schedule.rho_max;
    state.schedule.eta = config.schedule.eta;
    state.schedule.ramp_iterations = config.schedule.ramp_iterations;
    state.buffer = ReplayBuffer(config.reward_model.buffer_capacity);
    state.model = RewardModel(d, {config.reward_model.hidden, config.reward_model.learning_rate},
                              derive_seed(config.seed, Stream::model_init));
    return state;
}

void campaign_iteration(CampaignState& state, const Evaluator& evaluator) {
    const auto start = std::chrono::steady_clock::now();
    const CampaignConfig& cfg = state.config;
    const int j = state.next_iteration;
    const int population = cfg.population;
    const SigmaMode sigma_mode =
        cfg.per_dimension_sigma ? SigmaMode::per_dimension : SigmaMode::isotropic;

    // evaluation rate; forced to 0 until the model has actually trained
    double rho = 0.0;
    if (cfg.mode == CampaignMode::hybrid && state.model_trained) {
        state.schedule = advance(state.schedule, j);
        rho = *state.schedule.rho;
    } else if (cfg.mode == CampaignMode::rho_one && state.model_trained) {
        rho = 1.0;
    }

    std::vector<int> model_indices = split_population(rho, population, derive_seed(cfg.seed, Stream::split, j));
    if (cfg.elites_ground_truth_only) {
        // keep at least one elite pool's worth of ground truth
        const int max_model = population - cfg.elites;
        if (static_cast<int>(model_indices.size()) > max_model)
            model_indices.resize(static_cast<std::size_t>(max_model));
    }
    std::vector<char> scored_by_model(population, 0);
    for (int k : model_indices) scored_by_model[k] = 1;

    const GaussianSearchState sampler = (cfg.mode == CampaignMode::random_search)
                                            ? initial_state(cfg, static_cast<int>(state.search.mu.size()))
                                            : state.search;
    const std::vector<Eigen::VectorXd> actions =
        sample_population(sampler, population, derive_seed(cfg.seed, Stream::population, j), sigma_mode);

    std::vector<double> rewards(population, 0.0);
    std::vector<int> gt_indices;
    gt_indices.reserve(population);
    for (int k = 0; k < population; ++k) {
        if (scored_by_model[k]) {
            rewards[k] = state.model.predict(actions[k]);
        } else {
            gt_indices.push_back(k);
        }
    }

    // ground-truth evaluations are independent; scatter across threads and
    // collect by candidate index so the reduction order is fixed
    const int threads = std::min<int>(evaluation_threads(), std::max<std::size_t>(gt_indices.size(), 1));
    auto eval_range = [&](int thread_id) {
        for (std::size_t i = thread_id; i < gt_indices.size(); i += threads) {
            const int k = gt_indices[i];
            try {
                rewards[k] = evaluator.ground_truth(actions[k], derive_seed(cfg.seed, Stream::evaluate, j, k));
            } catch (const std::exception&) {
                rewards[k] = 0.0;  // failure reward; the loop continues
            }
        }
    };
    if (threads <= 1 || gt_indices.size() <= 1) {
        eval_range(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(eval_range, t);
        for (auto& t : pool) t.join();
    }

    for (int k : gt_indices) {
        state.buffer.append(actions[k], rewards[k]);
        ++state.ground_truth_candidates;
        state.env_interactions += evaluator.interactions_per_candidate();
        if (!state.has_best || rewards[k] > state.best_reward) {
            state.has_best = true;
            state.best_reward = rewards[k];
            state.best_action = actions[k];
        }
    }

    ElitePool pool;
    if (cfg.elites_ground_truth_only) {
        std::vector<Eigen::VectorXd> gt_actions;
        std::vector<double> gt_rewards;
        for (int k : gt_indices) {
            gt_actions.push_back(actions[k]);
            gt_rewards.push_back(rewards[k]);
        }
        pool = select_elites(gt_actions, gt_rewards, cfg.elites);
    } else {
        pool = select_elites(actions, rewards, cfg.elites);
    }

    IterationLog row;
    row.iter = j;
    {
        std::vector<double> elite_rewards;
        std::vector<double> elite_gt_rewards;
        for (const auto& e : pool.entries) {
            elite_rewards.push_back(e.reward);
            const bool from_model =
                !cfg.elites_ground_truth_only && scored_by_model[e.population_index];
            if (!from_model) elite_gt_rewards.push_back(e.reward);
        }
        row.elite_mean = mean_of(elite_rewards);
        row.elite_max = elite_rewards.front();
        if (!elite_gt_rewards.empty()) row.elite_gt_mean = mean_of(elite_gt_rewards);
    }

    if (cfg.mode != CampaignMode::random_search) {
        state.search = update_distribution(state.search, pool, cfg.sigma_floor, sigma_mode);
    } else {
        ++state.search.iteration;
    }

    if (cfg.mode == CampaignMode::hybrid || cfg.mode == CampaignMode::rho_one) {
        if (state.buffer.size() > static_cast<std::size_t>(cfg.reward_model.batch_size)) {
            double loss_sum = 0.0;
            int steps = 0;
            for (int epoch = 0; epoch < cfg.reward_model.train_epochs; ++epoch) {
                auto batch = state.buffer.sample_batch(cfg.reward_model.batch_size,
                                                       derive_seed(cfg.seed, Stream::batch, j, epoch));
                if (!batch) break;
                state.model.set_target_stats(state.buffer.reward_mean(), state.buffer.reward_std());
                loss_sum += state.model.train_step(*batch);
                ++steps;
            }
            if (steps > 0) {
                row.rm_loss = loss_sum / steps;
                state.model_trained = true;
            }
        }
    }

    row.env_interactions = state.env_interactions;
    row.rho = rho;
    row.sigma = state.search.sigma;
    // timings make logs and checkpoints differ between identical runs, so
    // they are only recorded when explicitly asked for
    row.wall_s = cfg.wall_clock_in_log
                     ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
                     : 0.0;
    state.log.push_back(row);
    state.next_iteration = j + 1;
}

CampaignResult campaign_result(const CampaignState& state) {
    CampaignResult r;
    r.final_action = state.search.mu;
    r.best_action = state.has_best ? state.best_action : Eigen::VectorXd::Zero(state.search.mu.size());
    r.best_reward = state.best_reward;
    r.log = state.log;
    r.env_interactions = state.env_interactions;
    r.ground_truth_candidates = state.ground_truth_candidates;
    r.buffer_total_appended = state.buffer.total_appended();
    r.final_state = state.search;
    return r;
}

CampaignResult run_campaign(const CampaignConfig& config, const std::string& checkpoint_path,
                            int checkpoint_every) {
    CampaignState state = init_campaign(config);
    const auto evaluator = make_evaluator(config);
    while (state.next_iteration <= config.iterations) {
        campaign_iteration(state, *evaluator);
        if (!checkpoint_path.empty() && checkpoint_every > 0 &&
            (state.next_iteration - 1) % checkpoint_every == 0) {
            save_checkpoint(checkpoint_path, state);
        }
    }
    if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, state);
    return campaign_result(state);
}

CampaignResult resume_campaign(const std::string& checkpoint_path, int override_iterations,
                               const std::string& new_checkpoint_path, int checkpoint_every) {
    CampaignState state = load_checkpoint(checkpoint_path);
    if (override_iterations > 0) state.config.iterations = override_iterations;
    const auto evaluator = make_evaluator(state.config);
    while (state.next_iteration <= state.config.iterations) {
        campaign_iteration(state, *evaluator);
        if (!new_checkpoint_path.empty() && checkpoint_every > 0 &&
            (state.next_iteration - 1) % checkpoint_every == 0) {
            save_checkpoint(new_checkpoint_path, state);
        }
    }
    if (!new_checkpoint_path.empty()) save_checkpoint(new_checkpoint_path, state);
    return campaign_result(state);
}

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));
}

nlohmann::json log_row_to_json(const IterationLog& row) {
    nlohmann::json j{{"iter", row.iter},
                     {"env_interactions", row.env_interactions},
                     {"elite_mean", row.elite_mean},
                     {"elite_max", row.elite_max},
                     {"rho", row.rho},
                     {"sigma", row.sigma},
                     {"wall_s", row.wall_s}};
    j["rm_loss"] = row.rm_loss.has_value() ? nlohmann::json(*row.rm_loss) : nlohmann::json(nullptr);
    j["elite_gt_mean"] =
        std::isnan(row.elite_gt_mean) ? nlohmann::json(nullptr) : nlohmann::json(row.elite_gt_mean);
    return j;
}

IterationLog log_row_from_json(const nlohmann::json& j) {
    IterationLog row;
    row.iter = j.at("iter").get<int>();
    row.env_interactions = j.at("env_interactions").get<long long>();
    row.elite_mean = j.at("elite_mean").get<double>();
    row.elite_max = j.at("elite_max").get<double>();
    row.rho = j.at("rho").get<double>();
    row.sigma = j.at("sigma").get<double>();
    row.wall_s = j.at("wall_s").get<double>();
    if (!j.at("rm_loss").is_null()) row.rm_loss = j.at("rm_loss").get<double>();
    if (!j.at("elite_gt_mean").is_null()) row.elite_gt_mean = j.at("elite_gt_mean").get<double>();
    return row;
}

}  // namespace

void save_checkpoint(const std::string& path, const CampaignState& state) {
    nlohmann::json search{{"mu", vector_to_json(state.search.mu)},
                          {"sigma", state.search.sigma},
                          {"iteration", state.search.iteration}};
    if (state.search.sigma_per_dim.size() > 0)
        search["sigma_per_dim"] = vector_to_json(state.search.sigma_per_dim);

    nlohmann::json j{{"kind", "cemrm-checkpoint"},
                     {"schema_version", 1},
                     {"config", campaign_config_to_json(state.config)},
                     {"next_iteration", state.next_iteration},
                     {"search", search},
                     {"schedule_rho", state.schedule.rho.has_value()
                                          ? nlohmann::json(*state.schedule.rho)
                                          : nlohmann::json(nullptr)},
                     {"model_trained", state.model_trained},
                     {"buffer", state.buffer.to_json()},
                     {"model", state.model.to_json()},
                     {"env_interactions", state.env_interactions},
                     {"ground_truth_candidates", state.ground_truth_candidates},
                     {"has_best", state.has_best},
                     {"best_reward", state.best_reward},
                     {"best_action", state.has_best ? vector_to_json(state.best_action)
                                                    : nlohmann::json::array()},
                     {"log", nlohmann::json::array()}};
    for (const auto& row : state.log) j["log"].push_back(log_row_to_json(row));

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
}

CampaignState load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("corrupt checkpoint " + path + ": " + e.what());
    }
    if (j.value("kind", std::string()) != "cemrm-checkpoint")
        throw std::runtime_error("not a checkpoint file: " + path);
    if (j.value("schema_version", -1) != 1)
        throw std::runtime_error("checkpoint schema version mismatch in " + path);

    CampaignState state;
    state.config = campaign_config_from_json(j.at("config"));
    state.next_iteration = j.at("next_iteration").get<int>();
    const auto& search = j.at("search");
    state.search.mu = vector_from_json(search.at("mu"));
    state.search.sigma = search.at("sigma").get<double>();
    state.search.iteration = search.at("iteration").get<int>();
    if (search.contains("sigma_per_dim"))
        state.search.sigma_per_dim = vector_from_json(search.at("sigma_per_dim"));
    state.schedule.rho_min = state.config.schedule.rho_min;
    state.schedule.rho_max = state.config.schedule.rho_max;
    state.schedule.eta = state.config.schedule.eta;
    state.schedule.ramp_iterations = state.config.schedule.ramp_iterations;
    if (!j.at("schedule_rho").is_null()) state.schedule.rho = j.at("schedule_rho").get<double>();
    state.model_trained = j.at("model_trained").get<bool>();
    state.buffer = ReplayBuffer::from_json(j.at("buffer"));
    state.model = RewardModel::from_json(j.at("model"));
    state.env_interactions = j.at("env_interactions").get<long long>();
    state.ground_truth_candidates = j.at("ground_truth_candidates").get<long long>();
    state.has_best = j.at("has_best").get<bool>();
    state.best_reward = j.at("best_reward").get<double>();
    if (state.has_best) state.best_action = vector_from_json(j.at("best_action"));
    for (const auto& row : j.at("log")) state.log.push_back(log_row_from_json(row));
    return state;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

std::string log_csv_text(const std::vector<IterationLog>& log, bool wall_clock) {
    std::string text = "iter,env_interactions,elite_mean,elite_max,rm_loss,rho,sigma,wall_s\n";
    for (const auto& row : log) {
        text += std::to_string(row.iter);
        text += ',';
        text += std::to_string(row.env_interactions);
        text += ',';
        text += format_double(row.elite_mean);
        text += ',';
        text += format_double(row.elite_max);
        text += ',';
        if (row.rm_loss.has_value()) text += format_double(*row.rm_loss);
        text += ',';
        text += format_double(row.rho);
        text += ',';
        text += format_double(row.sigma);
        text += ',';
        text += wall_clock ? format_double(row.wall_s) : std::string("0");
        text += '\n';
    }
    return text;
}

void write_log_csv(const std::string& path, const std::vector<IterationLog>& log, bool wall_clock) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write log: " + path);
    out << log_csv_text(log, wall_clock);
}

}  // namespace cemrm
