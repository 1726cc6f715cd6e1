#include "cemrm/cem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cemrm {

std::vector<Eigen::VectorXd> sample_population(const GaussianSearchState& state, int count,
                                               std::uint64_t seed, SigmaMode mode) {
    if (count < 1) throw std::invalid_argument("sample_population: count must be >= 1");
    Rng rng(seed);
    const int d = static_cast<int>(state.mu.size());
    // The scalar sigma re-estimated from elite deviations is an RMS radius
    // (it sums squared norms across all dimensions), so the isotropic draw
    // uses sigma/sqrt(d) per coordinate: E||x - mu||^2 = sigma^2. Sampling
    // sigma per coordinate instead would grow the radius by sqrt(d) every
    // update and the search would diverge in high dimension.
    const double radius_scale = state.sigma / std::sqrt(static_cast<double>(d));
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    for (int k = 0; k < count; ++k) {
        Eigen::VectorXd x(d);
        for (int i = 0; i < d; ++i) {
            const double scale = (mode == SigmaMode::per_dimension && state.sigma_per_dim.size() == d)
                                     ? state.sigma_per_dim[i]
                                     : radius_scale;
            x[i] = state.mu[i] + scale * rng.normal();
        }
        out.push_back(std::move(x));
    }
    return out;
}

ElitePool select_elites(const std::vector<Eigen::VectorXd>& actions,
                        const std::vector<double>& rewards, int elite_count) {
    if (actions.size() != rewards.size())
        throw std::invalid_argument("select_elites: actions and rewards differ in length");
    if (elite_count < 1 || static_cast<std::size_t>(elite_count) > actions.size())
        throw std::invalid_argument("select_elites: elite count exceeds population size");

    std::vector<int> order(actions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rewards[a] > rewards[b]; });

    ElitePool pool;
    pool.entries.reserve(elite_count);
    for (int i = 0; i < elite_count; ++i) {
        const int idx = order[i];
        pool.entries.push_back({actions[idx], rewards[idx], idx});
    }
    return pool;
}

GaussianSearchState update_distribution(const GaussianSearchState& state, const ElitePool& elites,
                                        double sigma_floor, SigmaMode mode) {
    if (elites.entries.empty()) throw std::invalid_argument("update_distribution: empty elite pool");
    const int d = static_cast<int>(state.mu.size());
    const double n = static_cast<double>(elites.entries.size());

    GaussianSearchState next = state;
    next.mu = Eigen::VectorXd::Zero(d);
    for (const auto& e : elites.entries) next.mu += e.action;
    next.mu /= n;

    if (mode == SigmaMode::per_dimension) {
        Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
        for (const auto& e : elites.entries) var += (e.action - next.mu).array().square().matrix();
        next.sigma_per_dim = (var / n).array().sqrt().max(sigma_floor).matrix();
        next.sigma = next.sigma_per_dim.mean();
    } else {
        double sum_sq = 0.0;
        for (const auto& e : elites.entries) sum_sq += (e.action - next.mu).squaredNorm();
        next.sigma = std::max(std::sqrt(sum_sq / n), sigma_floor);
        next.sigma_per_dim.resize(0);
    }
    next.iteration = state.iteration + 1;
    return next;
}

}  // namespace cemrm
