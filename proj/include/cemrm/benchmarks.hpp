#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace cemrm {

// Synthetic stand-in for the simulator: a reward surface over normalized
// actions with a known optimum. Actions are clamped to the [-1, 1] cube
// before scoring, mirroring the design-space clamp.
struct BenchmarkObjective {
    std::string name;
    int dimension = 36;
    std::function<double(const Eigen::VectorXd&)> reward;
    Eigen::VectorXd optimum;
    double optimum_value = 0.0;
    std::function<bool(const Eigen::VectorXd&)> invalid_region;  // null when absent
};

// sphere: negated squared distance to the optimum.
// rosenbrock: negated Rosenbrock valley (optimum at the all-ones corner).
// plateau-invalid: offset sphere with a 20%-volume invalid region scoring 0.
BenchmarkObjective make_benchmark(const std::string& name, int dimension);

std::vector<std::string> benchmark_names();

}  // namespace cemrm
