#include <doctest.h>

#include "cemrm/reward_model.hpp"

#include <cmath>
#include <set>

using namespace cemrm;

namespace {

RewardModel random_model(int input_dim, const std::vector<int>& hidden, std::uint64_t seed) {
    return RewardModel(input_dim, {hidden, 1e-3}, seed);
}

std::vector<BufferEntry> random_batch(int input_dim, int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<BufferEntry> batch;
    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd a(input_dim);
        for (int j = 0; j < input_dim; ++j) a[j] = rng.uniform(-1.0, 1.0);
        batch.push_back({a, rng.normal()});
    }
    return batch;
}

// central finite differences over every parameter, the gradient oracle
double gradient_check_relative_error(RewardModel model, const std::vector<BufferEntry>& batch) {
    std::vector<Eigen::MatrixXd> grad_w;
    std::vector<Eigen::VectorXd> grad_b;
    model.gradients(batch, grad_w, grad_b);

    const double h = 1e-5;
    double num = 0.0, denom = 0.0;
    for (int l = 0; l < model.layer_count(); ++l) {
        for (int r = 0; r < model.weight(l).rows(); ++r) {
            for (int c = 0; c < model.weight(l).cols(); ++c) {
                const double keep = model.weight(l)(r, c);
                model.mutable_weight(l)(r, c) = keep + h;
                const double up = model.batch_loss(batch);
                model.mutable_weight(l)(r, c) = keep - h;
                const double down = model.batch_loss(batch);
                model.mutable_weight(l)(r, c) = keep;
                const double fd = (up - down) / (2.0 * h);
                num += (grad_w[l](r, c) - fd) * (grad_w[l](r, c) - fd);
                denom += fd * fd;
            }
        }
        for (int r = 0; r < model.bias(l).size(); ++r) {
            const double keep = model.bias(l)(r);
            model.mutable_bias(l)(r) = keep + h;
            const double up = model.batch_loss(batch);
            model.mutable_bias(l)(r) = keep - h;
            const double down = model.batch_loss(batch);
            model.mutable_bias(l)(r) = keep;
            const double fd = (up - down) / (2.0 * h);
            num += (grad_b[l](r) - fd) * (grad_b[l](r) - fd);
            denom += fd * fd;
        }
    }
    return std::sqrt(num) / std::max(std::sqrt(denom), 1e-12);
}

}  // namespace

TEST_CASE("zero network predicts zero") {
    std::vector<Eigen::MatrixXd> w{Eigen::MatrixXd::Zero(4, 3), Eigen::MatrixXd::Zero(1, 4)};
    std::vector<Eigen::VectorXd> b{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(1)};
    const RewardModel m = RewardModel::from_layers(w, b, 1e-3);
    CHECK(m.predict(Eigen::Vector3d(0.3, -0.7, 2.0)) == 0.0);
}

TEST_CASE("single linear layer computes the affine map") {
    std::vector<Eigen::MatrixXd> w{(Eigen::MatrixXd(1, 2) << 1.0, 2.0).finished()};
    std::vector<Eigen::VectorXd> b{Eigen::VectorXd::Constant(1, 0.5)};
    const RewardModel m = RewardModel::from_layers(w, b, 1e-3);
    CHECK(m.predict(Eigen::Vector2d(1.0, 1.0)) == doctest::Approx(3.5).epsilon(1e-15));

    // determinism
    CHECK(m.predict(Eigen::Vector2d(0.2, -0.4)) == m.predict(Eigen::Vector2d(0.2, -0.4)));
}

TEST_CASE("hand-worked scalar SGD step") {
    // q(a) = w a with w = 0, batch {(a=1, r=2)}, alpha = 0.1:
    // L = 4, dL/dw = -2 (r - w a) a = -4, w' = 0.4
    std::vector<Eigen::MatrixXd> w{Eigen::MatrixXd::Zero(1, 1)};
    std::vector<Eigen::VectorXd> b{Eigen::VectorXd::Zero(1)};
    RewardModel m = RewardModel::from_layers(w, b, 0.1);
    const double loss = m.train_step({{Eigen::VectorXd::Constant(1, 1.0), 2.0}});
    CHECK(loss == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(m.weight(0)(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("a batch already fit perfectly is a fixed point") {
    RewardModel m = random_model(3, {5}, 77);
    std::vector<BufferEntry> batch;
    for (int i = 0; i < 4; ++i) {
        Eigen::VectorXd a = Eigen::VectorXd::Constant(3, 0.2 * i);
        batch.push_back({a, m.predict(a)});
    }
    const Eigen::MatrixXd w0 = m.weight(0);
    const double loss = m.train_step(batch);
    CHECK(loss == doctest::Approx(0.0).scale(1).epsilon(1e-20));
    CHECK((m.weight(0) - w0).norm() == doctest::Approx(0.0).scale(1).epsilon(1e-18));
}

TEST_CASE("analytic gradients match central finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RewardModel m = random_model(3, {5, 4}, seed);
        const auto batch = random_batch(3, 6, seed + 100);
        CHECK(gradient_check_relative_error(m, batch) < 1e-4);
    }
}

TEST_CASE("loss is non-increasing on a convex linear fit") {
    std::vector<Eigen::MatrixXd> w{Eigen::MatrixXd::Zero(1, 2)};
    std::vector<Eigen::VectorXd> b{Eigen::VectorXd::Zero(1)};
    RewardModel m = RewardModel::from_layers(w, b, 0.01);
    const auto batch = random_batch(2, 16, 4);
    double previous = m.batch_loss(batch);
    for (int i = 0; i < 50; ++i) {
        const double loss = m.train_step(batch);
        CHECK(loss <= previous + 1e-12);
        previous = loss;
    }
}

TEST_CASE("replay buffer sampling and eviction") {
    ReplayBuffer buffer(100);
    for (int i = 0; i < 10; ++i) buffer.append(Eigen::VectorXd::Constant(1, i), i);

    SUBCASE("not ready at exactly the batch size") {
        CHECK_FALSE(buffer.sample_batch(10, 1).has_value());
        buffer.append(Eigen::VectorXd::Constant(1, 10.0), 10.0);
        const auto batch = buffer.sample_batch(10, 1);
        REQUIRE(batch.has_value());
        CHECK(batch->size() == 10);
        std::set<double> distinct;
        for (const auto& e : *batch) distinct.insert(e.reward);
        CHECK(distinct.size() == 10);  // without replacement
    }

    SUBCASE("deterministic given the seed") {
        buffer.append(Eigen::VectorXd::Constant(1, 10.0), 10.0);
        const auto a = buffer.sample_batch(5, 42);
        const auto b = buffer.sample_batch(5, 42);
        REQUIRE(a.has_value());
        REQUIRE(b.has_value());
        for (std::size_t i = 0; i < a->size(); ++i) CHECK((*a)[i].reward == (*b)[i].reward);
    }

    SUBCASE("FIFO eviction at capacity") {
        ReplayBuffer small(4);
        for (int i = 0; i < 6; ++i) small.append(Eigen::VectorXd::Constant(1, i), i);
        CHECK(small.size() == 4);
        CHECK(small.total_appended() == 6);
        CHECK(small.entry(0).reward == 2.0);  // oldest surviving
        CHECK(small.entry(3).reward == 5.0);
    }
}

TEST_CASE("target standardization de-standardizes on predict") {
    std::vector<Eigen::MatrixXd> w{Eigen::MatrixXd::Zero(1, 1)};
    std::vector<Eigen::VectorXd> b{Eigen::VectorXd::Zero(1)};
    RewardModel m = RewardModel::from_layers(w, b, 0.1);
    m.set_target_stats(5.0, 2.0);
    CHECK(m.predict(Eigen::VectorXd::Zero(1)) == doctest::Approx(5.0));  // net outputs 0
}

TEST_CASE("model checkpoints reload bit-exactly") {
    RewardModel m = random_model(6, {8, 8}, 2024);
    m.set_target_stats(1.5, 0.25);
    const RewardModel back = RewardModel::from_json(m.to_json());
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        Eigen::VectorXd a(6);
        for (int j = 0; j < 6; ++j) a[j] = rng.uniform(-1, 1);
        CHECK(m.predict(a) == back.predict(a));
    }
}

TEST_CASE("non-finite parameters are a hard failure") {
    std::vector<Eigen::MatrixXd> w{Eigen::MatrixXd::Zero(1, 1)};
    std::vector<Eigen::VectorXd> b{Eigen::VectorXd::Zero(1)};
    RewardModel m = RewardModel::from_layers(w, b, 0.1);
    CHECK_THROWS_AS((void)m.train_step({{Eigen::VectorXd::Constant(1, 1.0),
                                         std::numeric_limits<double>::infinity()}}),
                    std::runtime_error);
}
