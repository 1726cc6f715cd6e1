#pragma once

#include "cemrm/design_space.hpp"
#include "cemrm/surrogate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cemrm {

struct ObjectSuccess {
    std::string object_id;
    DensityClass density_class = DensityClass::light;
    int successes = 0;
    int trials = 0;
};

struct SuccessReport {
    std::vector<ObjectSuccess> objects;
    int light_successes = 0;
    int light_trials = 0;
    int heavy_successes = 0;
    int heavy_trials = 0;
    double light_rate() const { return light_trials ? double(light_successes) / light_trials : 0.0; }
    double heavy_rate() const { return heavy_trials ? double(heavy_successes) / heavy_trials : 0.0; }
};

// Disturbance-test protocol: per object, `trials` rollouts with the impulse
// phase enabled, cycling through the object's records, scored by
// grasp_success. Deterministic given the seed.
SuccessReport run_disturbance_trials(const DesignVector& design, const Bundle& bundle,
                                     const PhaseConfig& base_phase, int trials, std::uint64_t seed);

std::string success_report_text(const SuccessReport& report);

}  // namespace cemrm
