#include "cemrm/compare.hpp"

#include "cemrm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace cemrm {

namespace {

ModeRunStats summarize(const CampaignConfig& config, const CampaignResult& result,
                       const Evaluator& evaluator) {
    ModeRunStats s;
    s.mode = config.mode;
    s.seed = config.seed;
    s.initial_elite_mean = result.log.front().elite_mean;
    s.final_elite_mean = result.log.back().elite_mean;
    s.total_env_interactions = result.env_interactions;
    s.final_true_reward =
        evaluator.ground_truth(result.final_action, derive_seed(config.seed, Stream::final_eval));
    return s;
}

long long env_to_reach(const CampaignResult& result, double threshold) {
    for (const auto& row : result.log) {
        if (row.elite_mean >= threshold) return row.env_interactions;
    }
    return -1;
}

}  // namespace

CompareReport run_compare(const CampaignConfig& base, const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() < 3) throw std::invalid_argument("compare needs at least 3 seeds");
    CompareReport report;

    const CampaignMode modes[4] = {CampaignMode::pure_cem, CampaignMode::hybrid, CampaignMode::rho_one,
                                   CampaignMode::random_search};

    for (std::uint64_t seed : seeds) {
        // pure CEM first: it anchors the per-seed threshold and normalization
        double threshold = 0.0;
        double r_init = 0.0;
        double improvement = 0.0;
        bool pure_ok = false;

        for (CampaignMode mode : modes) {
            CampaignConfig config = base;
            config.mode = mode;
            config.seed = seed;
            ModeRunStats stats;
            stats.mode = mode;
            stats.seed = seed;
            try {
                const auto evaluator = make_evaluator(config);
                const CampaignResult result = run_campaign(config);
                stats = summarize(config, result, *evaluator);
                if (mode == CampaignMode::pure_cem) {
                    r_init = stats.initial_elite_mean;
                    improvement = stats.final_true_reward - r_init;
                    threshold = r_init + 0.95 * improvement;
                    pure_ok = improvement > 1e-12;
                }
                stats.threshold = threshold;
                stats.env_to_threshold = env_to_reach(result, threshold);
                stats.normalized_final =
                    pure_ok ? (stats.final_true_reward - r_init) / improvement : 0.0;
            } catch (const std::exception& e) {
                stats.failed = true;
                stats.failure = e.what();
            }
            report.runs.push_back(std::move(stats));
        }
    }
    return report;
}

std::vector<const ModeRunStats*> runs_for_mode(const CompareReport& report, CampaignMode mode) {
    std::vector<const ModeRunStats*> out;
    for (const auto& r : report.runs)
        if (r.mode == mode) out.push_back(&r);
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string compare_csv_text(const CompareReport& report) {
    std::string text =
        "mode,seed,failed,initial_elite_mean,final_elite_mean,final_true_reward,total_env,"
        "env_to_95,normalized_final\n";
    char buf[256];
    for (const auto& r : report.runs) {
        std::snprintf(buf, sizeof(buf), "%s,%llu,%d,%.12g,%.12g,%.12g,%lld,%lld,%.12g\n",
                      to_string(r.mode).c_str(), static_cast<unsigned long long>(r.seed),
                      r.failed ? 1 : 0, r.initial_elite_mean, r.final_elite_mean, r.final_true_reward,
                      r.total_env_interactions, r.env_to_threshold, r.normalized_final);
        text += buf;
    }
    return text;
}

std::string compare_summary_text(const CompareReport& report) {
    std::ostringstream os;
    os << "mode        final_true (mean +- std)    normalized  env_to_95 (median)\n";
    for (CampaignMode mode : {CampaignMode::pure_cem, CampaignMode::hybrid, CampaignMode::rho_one,
                              CampaignMode::random_search}) {
        const auto runs = runs_for_mode(report, mode);
        if (runs.empty()) continue;
        std::vector<double> finals, normalized, env_to;
        bool any_failed = false;
        for (const auto* r : runs) {
            if (r->failed) {
                any_failed = true;
                continue;
            }
            finals.push_back(r->final_true_reward);
            normalized.push_back(r->normalized_final);
            if (r->env_to_threshold >= 0) env_to.push_back(static_cast<double>(r->env_to_threshold));
        }
        double mean = 0.0, sd = 0.0;
        for (double f : finals) mean += f;
        if (!finals.empty()) mean /= static_cast<double>(finals.size());
        for (double f : finals) sd += (f - mean) * (f - mean);
        if (finals.size() > 1) sd = std::sqrt(sd / static_cast<double>(finals.size() - 1));

        char line[256];
        std::snprintf(line, sizeof(line), "%-11s %12.5g +- %-10.4g %10.4g  %12.6g%s\n",
                      to_string(mode).c_str(), mean, sd, median(normalized),
                      env_to.empty() ? std::numeric_limits<double>::quiet_NaN() : median(env_to),
                      any_failed ? "  [FAILED RUNS]" : "");
        os << line;
    }
    return os.str();
}

}  // namespace cemrm
