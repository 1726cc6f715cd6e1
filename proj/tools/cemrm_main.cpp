#include <CLI11.hpp>

#include "cemrm/benchmarks.hpp"
#include "cemrm/compare.hpp"
#include "cemrm/evaluation.hpp"
#include "cemrm/orchestrator.hpp"
#include "cemrm/retargeting.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace cemrm;

namespace {

constexpr int kExitConfig = 2;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_action_json(const fs::path& path, const CampaignResult& result) {
    nlohmann::json j{
        {"final_action", std::vector<double>(result.final_action.data(),
                                             result.final_action.data() + result.final_action.size())},
        {"best_action", std::vector<double>(result.best_action.data(),
                                            result.best_action.data() + result.best_action.size())},
        {"best_reward", result.best_reward},
        {"env_interactions", result.env_interactions}};
    write_text(path, j.dump(2) + "\n");
}

int cmd_optimize(const std::string& config_path, const std::string& resume_path,
                 const std::string& out_dir, int seed_override, bool has_seed,
                 const std::string& mode_override, int iterations_override, int checkpoint_every) {
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    const std::string checkpoint = (out / "checkpoint.json").string();

    CampaignResult result;
    CampaignConfig config;
    if (!resume_path.empty()) {
        CampaignState state = load_checkpoint(resume_path);
        config = state.config;
        if (iterations_override > 0) config.iterations = iterations_override;
        result = resume_campaign(resume_path, iterations_override, checkpoint, checkpoint_every);
    } else {
        config = load_campaign_config(config_path);
        if (has_seed) config.seed = static_cast<std::uint64_t>(seed_override);
        if (!mode_override.empty()) config.mode = campaign_mode_from_string(mode_override);
        if (iterations_override > 0) config.iterations = iterations_override;
        result = run_campaign(config, checkpoint, checkpoint_every);
    }

    write_log_csv((out / "log.csv").string(), result.log, config.wall_clock_in_log);
    write_action_json(out / "final_action.json", result);
    if (config.evaluator_kind == "surrogate") {
        const auto evaluator = make_evaluator(config);
        if (const auto design = evaluator->to_design(result.final_action))
            save_design((out / "final_design.json").string(), *design);
        if (const auto best = evaluator->to_design(result.best_action))
            save_design((out / "best_design.json").string(), *best);
    }

    std::cout << "mode: " << to_string(config.mode) << "\n"
              << "iterations: " << result.log.size() << "\n"
              << "final elite mean: " << result.log.back().elite_mean << "\n"
              << "env_interactions: " << result.env_interactions << "\n"
              << "artifacts: " << out_dir << "\n";
    return 0;
}

int cmd_compare(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
                const std::string& out_dir) {
    const CampaignConfig base = load_campaign_config(config_path);
    const CompareReport report = run_compare(base, seeds);
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "comparison.csv", compare_csv_text(report));
    const std::string summary = compare_summary_text(report);
    write_text(fs::path(out_dir) / "summary.txt", summary);
    std::cout << summary;
    return 0;
}

int cmd_evaluate(const std::string& design_path, const std::string& bundle_dir, int trials,
                 std::uint64_t seed, const std::string& config_path) {
    const DesignVector design = load_design(design_path);
    const Bundle bundle = load_bundle(bundle_dir);
    PhaseConfig phase;
    if (!config_path.empty()) {
        const CampaignConfig config = load_campaign_config(config_path);
        if (config.evaluator_kind == "surrogate") phase = config.surrogate.phase;
    }
    const SuccessReport report = run_disturbance_trials(design, bundle, phase, trials, seed);
    std::cout << success_report_text(report);
    return 0;
}

int cmd_retarget(const std::string& stream_path, const std::string& calibration_path,
                 const std::string& out_dir) {
    const auto frames = load_stream(stream_path);
    const auto calibration = load_calibration(calibration_path);

    // one record per marked grasp event; each event owns the frames up to the
    // next event so the lift is measured inside its own demonstration
    std::vector<std::size_t> grasp_indices;
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (frames[i].grasp_event) grasp_indices.push_back(i);
    if (grasp_indices.empty()) {
        std::cerr << "warning: stream has no marked grasp event; nothing to do\n";
        return 0;
    }

    fs::create_directories(fs::path(out_dir) / "records");
    std::vector<std::string> written;
    for (std::size_t g = 0; g < grasp_indices.size(); ++g) {
        const std::size_t begin = g == 0 ? 0 : grasp_indices[g - 1] + 1;
        const std::size_t end = g + 1 < grasp_indices.size() ? grasp_indices[g + 1] : frames.size();
        const std::vector<HandFrame> segment(frames.begin() + begin, frames.begin() + end);
        const TeleopRecord record = compile_record(segment, calibration);
        const std::string rel = "records/" + calibration.object_id + "_retarget_" + std::to_string(g) + ".json";
        write_text(fs::path(out_dir) / rel, nlohmann::json(record).dump(2) + "\n");
        written.push_back(rel);
    }

    // fold the new records into the bundle manifest when one is present
    const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        nlohmann::json manifest;
        in >> manifest;
        bool matched = false;
        for (auto& entry : manifest.at("objects")) {
            std::ifstream obj_in(fs::path(out_dir) / entry.at("object").get<std::string>());
            if (!obj_in) continue;
            nlohmann::json oj;
            obj_in >> oj;
            if (oj.at("object_id").get<std::string>() != calibration.object_id) continue;
            matched = true;
            for (const auto& rel : written) {
                bool present = false;
                for (const auto& existing : entry.at("records"))
                    present = present || existing.get<std::string>() == rel;
                if (!present) entry.at("records").push_back(rel);
            }
        }
        if (matched) {
            write_text(manifest_path, manifest.dump(2) + "\n");
        } else {
            std::cerr << "warning: manifest has no object '" << calibration.object_id
                      << "'; records written but not linked\n";
        }
    } else {
        nlohmann::json index{{"object_id", calibration.object_id}, {"records", written}};
        write_text(fs::path(out_dir) / "retargeted.json", index.dump(2) + "\n");
    }

    std::cout << "wrote " << written.size() << " record(s) to " << out_dir << "\n";
    return 0;
}

int cmd_bench_list() {
    for (const auto& name : benchmark_names()) {
        const BenchmarkObjective b = make_benchmark(name, 36);
        std::cout << name << "  d=" << b.dimension << "  optimum_value=" << b.optimum_value << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CEM with reward model: surrogate-assisted design optimization"};
    app.require_subcommand(1);

    // optimize
    auto* optimize = app.add_subcommand("optimize", "run one optimization campaign");
    std::string config_path, resume_path, out_dir = "out", mode_override;
    int seed_override = 0, iterations_override = 0, checkpoint_every = 0;
    bool has_seed = false;
    optimize->add_option("--config", config_path, "campaign config JSON");
    optimize->add_option("--resume", resume_path, "resume from a checkpoint file");
    optimize->add_option("--out", out_dir, "output directory");
    optimize->add_option("--seed", seed_override, "master seed override")->each([&](const std::string&) {
        has_seed = true;
    });
    optimize->add_option("--mode", mode_override, "pure-cem | hybrid | rho1 | random");
    optimize->add_option("--iterations", iterations_override, "iteration budget override");
    optimize->add_option("--checkpoint-every", checkpoint_every, "checkpoint every N iterations");

    // compare
    auto* compare = app.add_subcommand("compare", "compare pure-cem, hybrid, rho1 and random");
    std::string cmp_config, cmp_out = "compare_out";
    std::vector<std::uint64_t> seeds;
    compare->add_option("--config", cmp_config, "base campaign config JSON")->required();
    compare->add_option("--seeds", seeds, "at least 3 master seeds")->required()->delimiter(',');
    compare->add_option("--out", cmp_out, "output directory");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "disturbance-test a design on a bundle");
    std::string eval_design, eval_bundle, eval_config;
    int trials = 5;
    std::uint64_t eval_seed = 0;
    evaluate->add_option("--design", eval_design, "design JSON")->required();
    evaluate->add_option("--bundle", eval_bundle, "record bundle directory")->required();
    evaluate->add_option("--trials", trials, "trials per object");
    evaluate->add_option("--seed", eval_seed, "master seed");
    evaluate->add_option("--config", eval_config, "campaign config supplying the phase constants");

    // retarget
    auto* retarget = app.add_subcommand("retarget", "compile teleop records from a hand-frame stream");
    std::string stream_path, calibration_path, retarget_out = "retarget_out";
    retarget->add_option("--stream", stream_path, "JSON-lines hand-frame stream")->required();
    retarget->add_option("--calibration", calibration_path, "calibration JSON")->required();
    retarget->add_option("--out", retarget_out, "output directory");

    auto* bench = app.add_subcommand("bench-list", "list benchmark objectives");

    CLI11_PARSE(app, argc, argv);

    try {
        if (optimize->parsed()) {
            if (config_path.empty() && resume_path.empty()) {
                std::cerr << "error: optimize needs --config or --resume\n";
                return kExitConfig;
            }
            return cmd_optimize(config_path, resume_path, out_dir, seed_override, has_seed,
                                mode_override, iterations_override, checkpoint_every);
        }
        if (compare->parsed()) return cmd_compare(cmp_config, seeds, cmp_out);
        if (evaluate->parsed()) return cmd_evaluate(eval_design, eval_bundle, trials, eval_seed, eval_config);
        if (retarget->parsed()) return cmd_retarget(stream_path, calibration_path, retarget_out);
        if (bench->parsed()) return cmd_bench_list();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string what = e.what();
        if (what.find("config") != std::string::npos || what.find("cannot open") != std::string::npos)
            return kExitConfig;
        return 1;
    }
    return 0;
}
