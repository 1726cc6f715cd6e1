#pragma once

#include <Eigen/Core>

#include <json.hpp>

#include "cemrm/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace cemrm {

struct BufferEntry {
    Eigen::VectorXd action;  // normalized action, dimension d
    double reward = 0.0;     // ground-truth reward
};

// Append-only ring buffer of ground-truth (action, reward) pairs. The model
// never writes its own predictions here; total_appended() exists so campaigns
// can audit that.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {}

    void append(Eigen::VectorXd action, double reward);
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t total_appended() const { return total_appended_; }
    const BufferEntry& entry(std::size_t i) const { return entries_[(head_ + i) % entries_.size()]; }

    // Running statistics over every reward ever appended (not rewound on
    // eviction); used to standardize training targets.
    double reward_mean() const { return count_ > 0 ? mean_ : 0.0; }
    double reward_std() const;

    // Uniform sample without replacement; requires size() > batch_size,
    // otherwise "not ready".
    std::optional<std::vector<BufferEntry>> sample_batch(int batch_size, std::uint64_t seed) const;

    nlohmann::json to_json() const;
    static ReplayBuffer from_json(const nlohmann::json& j);

private:
    std::size_t capacity_;
    std::vector<BufferEntry> entries_;
    std::size_t head_ = 0;  // oldest entry once full
    std::uint64_t total_appended_ = 0;
    // Welford accumulator
    std::uint64_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct MlpConfig {
    std::vector<int> hidden{64, 64};
    double learning_rate = 1e-3;
};

// Multilayer perceptron critic Q(a | theta): input(d) -> hidden layers with
// tanh -> scalar, trained by plain SGD on the mean squared error. Targets are
// standardized by the replay buffer's running statistics and de-standardized
// on predict; with default statistics (0, 1) the mapping is the identity.
class RewardModel {
public:
    RewardModel() = default;
    RewardModel(int input_dim, const MlpConfig& config, std::uint64_t init_seed);

    // Build directly from layer matrices (tests, hand-constructed nets).
    static RewardModel from_layers(std::vector<Eigen::MatrixXd> weights,
                                   std::vector<Eigen::VectorXd> biases, double learning_rate);

    double predict(const Eigen::VectorXd& action) const;

    void set_target_stats(double mean, double stddev);
    double target_mean() const { return target_mean_; }
    double target_std() const { return target_std_; }

    // One plain-SGD step on the batch. Returns the MSE (in standardized
    // target units) computed with the pre-update parameters. Throws on
    // non-finite loss, gradient or parameter.
    double train_step(const std::vector<BufferEntry>& batch);

    double learning_rate() const { return learning_rate_; }
    void set_learning_rate(double lr) { learning_rate_ = lr; }
    int input_dim() const { return input_dim_; }
    int layer_count() const { return static_cast<int>(weights_.size()); }
    const Eigen::MatrixXd& weight(int layer) const { return weights_[layer]; }
    const Eigen::VectorXd& bias(int layer) const { return biases_[layer]; }
    Eigen::MatrixXd& mutable_weight(int layer) { return weights_[layer]; }
    Eigen::VectorXd& mutable_bias(int layer) { return biases_[layer]; }

    // Analytic gradient of the batch MSE w.r.t. every parameter, without
    // updating; exposed for the finite-difference checks.
    void gradients(const std::vector<BufferEntry>& batch, std::vector<Eigen::MatrixXd>& grad_w,
                   std::vector<Eigen::VectorXd>& grad_b) const;
    double batch_loss(const std::vector<BufferEntry>& batch) const;

    nlohmann::json to_json() const;
    static RewardModel from_json(const nlohmann::json& j);

private:
    double forward(const Eigen::VectorXd& input, std::vector<Eigen::VectorXd>* activations) const;

    int input_dim_ = 0;
    double learning_rate_ = 1e-3;
    double target_mean_ = 0.0;
    double target_std_ = 1.0;
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
};

}  // namespace cemrm
