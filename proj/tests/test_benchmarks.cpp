#include <doctest.h>

#include "cemrm/benchmarks.hpp"
#include "cemrm/rng.hpp"

using namespace cemrm;

TEST_CASE("declared optima dominate random probes") {
    Rng rng(404);
    for (const auto& name : benchmark_names()) {
        const BenchmarkObjective b = make_benchmark(name, 36);
        const double at_optimum = b.reward(b.optimum);
        CHECK(at_optimum == doctest::Approx(b.optimum_value).epsilon(1e-12));
        for (int probe = 0; probe < 10000; ++probe) {
            Eigen::VectorXd a(b.dimension);
            for (int i = 0; i < b.dimension; ++i) a[i] = rng.uniform(-1.0, 1.0);
            CHECK(at_optimum >= b.reward(a));
        }
    }
}

TEST_CASE("plateau-invalid zeroes its invalid region") {
    const BenchmarkObjective b = make_benchmark("plateau-invalid", 36);
    REQUIRE(static_cast<bool>(b.invalid_region));
    Eigen::VectorXd inside = Eigen::VectorXd::Constant(36, 0.1);
    inside[0] = 0.8;
    CHECK(b.invalid_region(inside));
    CHECK(b.reward(inside) == 0.0);

    // roughly 20% of the cube's volume is invalid
    Rng rng(7);
    int invalid = 0;
    const int probes = 20000;
    for (int i = 0; i < probes; ++i) {
        Eigen::VectorXd a(36);
        for (int j = 0; j < 36; ++j) a[j] = rng.uniform(-1.0, 1.0);
        if (b.invalid_region(a)) ++invalid;
    }
    CHECK(static_cast<double>(invalid) / probes == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("unknown benchmark name is rejected") {
    CHECK_THROWS_AS((void)make_benchmark("cliffs", 10), std::invalid_argument);
}
