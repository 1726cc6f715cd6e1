#include "cemrm/scheduler.hpp"

#include "cemrm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cemrm {

double linear_rate(int iteration, int ramp_iterations, double rho_min, double rho_max) {
    if (iteration < 1 || ramp_iterations < 1)
        throw std::invalid_argument("linear_rate: iteration and ramp must be >= 1");
    const double rate =
        rho_min + (rho_max - rho_min) * static_cast<double>(iteration) / static_cast<double>(ramp_iterations);
    return std::clamp(rate, std::min(rho_min, rho_max), std::max(rho_min, rho_max));
}

RateSchedule advance(RateSchedule schedule, int iteration) {
    const double lin = linear_rate(iteration, schedule.ramp_iterations, schedule.rho_min, schedule.rho_max);
    if (!schedule.rho.has_value()) {
        schedule.rho = lin;
    } else {
        schedule.rho = schedule.eta * *schedule.rho + (1.0 - schedule.eta) * lin;
    }
    return schedule;
}

std::vector<int> split_population(double rho, int population, std::uint64_t seed) {
    if (population < 1) throw std::invalid_argument("split_population: population must be >= 1");
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("split_population: rho outside [0, 1]");

    const long count = std::lround(rho * static_cast<double>(population));
    const int n = static_cast<int>(std::min<long>(count, population));
    std::vector<int> idx(population);
    std::iota(idx.begin(), idx.end(), 0);

    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const int pick = i + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(population - i)));
        std::swap(idx[i], idx[pick]);
    }
    std::vector<int> out(idx.begin(), idx.begin() + n);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace cemrm
