#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace cemrm {

// Evaluation-rate schedule: the fraction rho of each population scored by the
// reward model instead of ground truth.
struct RateSchedule {
    double rho_min = 0.1;
    double rho_max = 0.7;
    double eta = 0.9;           // smoothing factor
    int ramp_iterations = 100;  // N: iterations over which the linear rate climbs
    std::optional<double> rho;  // absent before the first advance
};

// rho_l^j = rho_min + (1/N)(rho_max - rho_min) * j, clamped to [rho_min, rho_max].
double linear_rate(int iteration, int ramp_iterations, double rho_min, double rho_max);

// First call initializes rho to the linear rate; later calls blend
// rho <- eta * rho + (1 - eta) * rho_l^j.
RateSchedule advance(RateSchedule schedule, int iteration);

// Uniformly chosen subset of {0..population-1} of size round(rho * population)
// (half away from zero), without replacement, sorted ascending.
std::vector<int> split_population(double rho, int population, std::uint64_t seed);

}  // namespace cemrm
