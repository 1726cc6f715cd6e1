#pragma once

#include <Eigen/Core>

#include "cemrm/rng.hpp"

#include <cstdint>
#include <vector>

namespace cemrm {

enum class SigmaMode { isotropic, per_dimension };

// The search distribution around mu. In the default isotropic mode sigma is
// a single scalar measuring the distribution's RMS radius (the quantity the
// elite update re-estimates); sigma_per_dim holds classic per-coordinate
// deviations when the per-dimension variant is switched on.
struct GaussianSearchState {
    Eigen::VectorXd mu;
    double sigma = 0.0;
    Eigen::VectorXd sigma_per_dim;  // empty unless SigmaMode::per_dimension
    int iteration = 0;
};

struct EliteEntry {
    Eigen::VectorXd action;
    double reward = 0.0;
    int population_index = -1;
};

struct ElitePool {
    std::vector<EliteEntry> entries;  // rewards non-increasing
};

// K i.i.d. draws from the current distribution; deterministic given the seed.
std::vector<Eigen::VectorXd> sample_population(const GaussianSearchState& state, int count,
                                               std::uint64_t seed,
                                               SigmaMode mode = SigmaMode::isotropic);

// Top elite_count rewards, ties broken by lower population index.
ElitePool select_elites(const std::vector<Eigen::VectorXd>& actions,
                        const std::vector<double>& rewards, int elite_count);

// mu <- elite mean; sigma <- sqrt(mean squared Euclidean deviation from the
// new mu), floored at sigma_floor; iteration incremented.
GaussianSearchState update_distribution(const GaussianSearchState& state, const ElitePool& elites,
                                        double sigma_floor,
                                        SigmaMode mode = SigmaMode::isotropic);

}  // namespace cemrm
