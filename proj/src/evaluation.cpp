#include "cemrm/evaluation.hpp"

#include "cemrm/objective.hpp"
#include "cemrm/rng.hpp"

#include <cstdio>
#include <sstream>

namespace cemrm {

SuccessReport run_disturbance_trials(const DesignVector& design, const Bundle& bundle,
                                     const PhaseConfig& base_phase, int trials, std::uint64_t seed) {
    SuccessReport report;
    for (std::size_t i = 0; i < bundle.objects.size(); ++i) {
        const SimObject& object = bundle.objects[i];
        ObjectSuccess row;
        row.object_id = object.object_id;
        row.density_class = object.density_class;
        row.trials = trials;
        for (int t = 0; t < trials; ++t) {
            const TeleopRecord& record = bundle.records[i][t % bundle.records[i].size()];
            PhaseConfig phase = base_phase;
            phase.disturbance = true;
            phase.seed = derive_seed(seed, Stream::impulse, i, static_cast<std::uint64_t>(t));
            const EvalOutcome outcome = rollout(design, record, object, phase);
            if (grasp_success(outcome)) ++row.successes;
        }
        if (row.density_class == DensityClass::light) {
            report.light_successes += row.successes;
            report.light_trials += row.trials;
        } else {
            report.heavy_successes += row.successes;
            report.heavy_trials += row.trials;
        }
        report.objects.push_back(row);
    }
    return report;
}

std::string success_report_text(const SuccessReport& report) {
    std::ostringstream os;
    os << "object                    class   success\n";
    char line[128];
    for (const auto& o : report.objects) {
        std::snprintf(line, sizeof(line), "%-25s %-7s %d/%d\n", o.object_id.c_str(),
                      o.density_class == DensityClass::light ? "light" : "heavy", o.successes, o.trials);
        os << line;
    }
    std::snprintf(line, sizeof(line), "%-25s %-7s %d/%d (%.1f%%)\n", "[class]", "light",
                  report.light_successes, report.light_trials, 100.0 * report.light_rate());
    os << line;
    std::snprintf(line, sizeof(line), "%-25s %-7s %d/%d (%.1f%%)\n", "[class]", "heavy",
                  report.heavy_successes, report.heavy_trials, 100.0 * report.heavy_rate());
    os << line;
    return os.str();
}

}  // namespace cemrm
