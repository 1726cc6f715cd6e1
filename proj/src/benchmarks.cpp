#include "cemrm/benchmarks.hpp"

#include <stdexcept>

namespace cemrm {

namespace {

Eigen::VectorXd clamp_cube(const Eigen::VectorXd& a) {
    return a.array().min(1.0).max(-1.0).matrix();
}

}  // namespace

BenchmarkObjective make_benchmark(const std::string& name, int dimension) {
    if (dimension < 2) throw std::invalid_argument("benchmark dimension must be >= 2");
    BenchmarkObjective b;
    b.name = name;
    b.dimension = dimension;

    if (name == "sphere") {
        b.optimum = Eigen::VectorXd::Constant(dimension, 0.55);
        b.optimum_value = 0.0;
        const Eigen::VectorXd target = b.optimum;
        b.reward = [target](const Eigen::VectorXd& a) {
            return -(clamp_cube(a) - target).squaredNorm();
        };
    } else if (name == "rosenbrock") {
        b.optimum = Eigen::VectorXd::Constant(dimension, 1.0);
        b.optimum_value = 0.0;
        b.reward = [](const Eigen::VectorXd& a) {
            const Eigen::VectorXd x = clamp_cube(a);
            double f = 0.0;
            for (int i = 0; i + 1 < x.size(); ++i) {
                const double t1 = x[i + 1] - x[i] * x[i];
                const double t2 = 1.0 - x[i];
                f += 100.0 * t1 * t1 + t2 * t2;
            }
            return -f;
        };
    } else if (name == "plateau-invalid") {
        // First slot above 0.6 is invalid (20% of the cube's volume) and
        // scores exactly 0; valid points score 10 - squared distance, so the
        // optimum dominates the plateau.
        b.optimum = Eigen::VectorXd::Constant(dimension, 0.55);
        b.optimum_value = 10.0;
        const Eigen::VectorXd target = b.optimum;
        b.invalid_region = [](const Eigen::VectorXd& a) { return clamp_cube(a)[0] > 0.6; };
        auto invalid = b.invalid_region;
        b.reward = [target, invalid](const Eigen::VectorXd& a) {
            if (invalid(a)) return 0.0;
            return 10.0 - (clamp_cube(a) - target).squaredNorm();
        };
    } else {
        throw std::invalid_argument("unknown benchmark '" + name + "'");
    }
    return b;
}

std::vector<std::string> benchmark_names() { return {"sphere", "rosenbrock", "plateau-invalid"}; }

}  // namespace cemrm
