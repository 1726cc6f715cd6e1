#include "cemrm/reward_model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cemrm {

void ReplayBuffer::append(Eigen::VectorXd action, double reward) {
    ++total_appended_;
    ++count_;
    const double delta = reward - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (reward - mean_);

    if (entries_.size() < capacity_) {
        entries_.push_back({std::move(action), reward});
    } else {
        entries_[head_] = {std::move(action), reward};
        head_ = (head_ + 1) % capacity_;
    }
}

double ReplayBuffer::reward_std() const {
    if (count_ < 2) return 1.0;
    const double var = m2_ / static_cast<double>(count_);
    const double sd = std::sqrt(var);
    return sd > 1e-12 ? sd : 1.0;
}

std::optional<std::vector<BufferEntry>> ReplayBuffer::sample_batch(int batch_size,
                                                                   std::uint64_t seed) const {
    if (batch_size < 1) throw std::invalid_argument("sample_batch: batch size must be >= 1");
    if (size() <= static_cast<std::size_t>(batch_size)) return std::nullopt;

    Rng rng(seed);
    std::vector<std::size_t> idx(size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<BufferEntry> batch;
    batch.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        const std::size_t pick = i + rng.bounded(idx.size() - i);
        std::swap(idx[i], idx[pick]);
        batch.push_back(entry(idx[i]));
    }
    return batch;
}

nlohmann::json ReplayBuffer::to_json() const {
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < size(); ++i) {
        const auto& e = entry(i);
        entries.push_back({{"a", std::vector<double>(e.action.data(), e.action.data() + e.action.size())},
                           {"r", e.reward}});
    }
    return {{"capacity", capacity_},
            {"entries", entries},
            {"total_appended", total_appended_},
            {"stat_count", count_},
            {"stat_mean", mean_},
            {"stat_m2", m2_}};
}

ReplayBuffer ReplayBuffer::from_json(const nlohmann::json& j) {
    ReplayBuffer b(j.at("capacity").get<std::size_t>());
    for (const auto& e : j.at("entries")) {
        const auto a = e.at("a").get<std::vector<double>>();
        Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<int>(a.size()));
        b.entries_.push_back({std::move(v), e.at("r").get<double>()});
    }
    b.head_ = 0;  // entries were serialized oldest-first
    b.total_appended_ = j.at("total_appended").get<std::uint64_t>();
    b.count_ = j.at("stat_count").get<std::uint64_t>();
    b.mean_ = j.at("stat_mean").get<double>();
    b.m2_ = j.at("stat_m2").get<double>();
    return b;
}

RewardModel::RewardModel(int input_dim, const MlpConfig& config, std::uint64_t init_seed)
    : input_dim_(input_dim), learning_rate_(config.learning_rate) {
    Rng rng(init_seed);
    int fan_in = input_dim;
    for (int width : config.hidden) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Eigen::MatrixXd w(width, fan_in);
        Eigen::VectorXd b(width);
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
        for (int r = 0; r < b.size(); ++r) b[r] = rng.uniform(-bound, bound);
        weights_.push_back(std::move(w));
        biases_.push_back(std::move(b));
        fan_in = width;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(1, fan_in);
    Eigen::VectorXd b(1);
    for (int c = 0; c < w.cols(); ++c) w(0, c) = rng.uniform(-bound, bound);
    b[0] = rng.uniform(-bound, bound);
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
}

RewardModel RewardModel::from_layers(std::vector<Eigen::MatrixXd> weights,
                                     std::vector<Eigen::VectorXd> biases, double learning_rate) {
    if (weights.empty() || weights.size() != biases.size())
        throw std::invalid_argument("from_layers: need matching weight/bias lists");
    RewardModel m;
    m.input_dim_ = static_cast<int>(weights.front().cols());
    m.learning_rate_ = learning_rate;
    m.weights_ = std::move(weights);
    m.biases_ = std::move(biases);
    return m;
}

void RewardModel::set_target_stats(double mean, double stddev) {
    target_mean_ = mean;
    target_std_ = stddev > 1e-12 ? stddev : 1.0;
}

double RewardModel::forward(const Eigen::VectorXd& input,
                            std::vector<Eigen::VectorXd>* activations) const {
    Eigen::VectorXd x = input;
    if (activations) {
        activations->clear();
        activations->push_back(x);
    }
    const int last = layer_count() - 1;
    for (int l = 0; l < last; ++l) {
        x = ((weights_[l] * x + biases_[l]).array().tanh()).matrix();
        if (activations) activations->push_back(x);
    }
    const Eigen::VectorXd out = weights_[last] * x + biases_[last];
    return out[0];
}

double RewardModel::predict(const Eigen::VectorXd& action) const {
    if (action.size() != input_dim_)
        throw std::invalid_argument("predict: input has dimension " + std::to_string(action.size()) +
                                    ", expected " + std::to_string(input_dim_));
    return target_mean_ + target_std_ * forward(action, nullptr);
}

double RewardModel::batch_loss(const std::vector<BufferEntry>& batch) const {
    double loss = 0.0;
    for (const auto& e : batch) {
        const double target = (e.reward - target_mean_) / target_std_;
        const double err = target - forward(e.action, nullptr);
        loss += err * err;
    }
    return loss / static_cast<double>(batch.size());
}

void RewardModel::gradients(const std::vector<BufferEntry>& batch, std::vector<Eigen::MatrixXd>& grad_w,
                            std::vector<Eigen::VectorXd>& grad_b) const {
    const int layers = layer_count();
    grad_w.assign(layers, Eigen::MatrixXd());
    grad_b.assign(layers, Eigen::VectorXd());
    for (int l = 0; l < layers; ++l) {
        grad_w[l] = Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols());
        grad_b[l] = Eigen::VectorXd::Zero(biases_[l].size());
    }

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::vector<Eigen::VectorXd> acts;
    for (const auto& e : batch) {
        const double target = (e.reward - target_mean_) / target_std_;
        const double y = forward(e.action, &acts);
        // dL/dy for one sample of the batch mean of squared errors
        double dy = -2.0 * (target - y) * inv_n;

        Eigen::VectorXd delta(1);
        delta[0] = dy;
        for (int l = layers - 1; l >= 0; --l) {
            grad_w[l] += delta * acts[l].transpose();
            grad_b[l] += delta;
            if (l > 0) {
                Eigen::VectorXd back = weights_[l].transpose() * delta;
                // tanh' = 1 - tanh^2, and acts[l] already holds tanh(z)
                delta = (back.array() * (1.0 - acts[l].array().square())).matrix();
            }
        }
    }
}

double RewardModel::train_step(const std::vector<BufferEntry>& batch) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const double loss = batch_loss(batch);

    std::vector<Eigen::MatrixXd> grad_w;
    std::vector<Eigen::VectorXd> grad_b;
    gradients(batch, grad_w, grad_b);

    for (int l = 0; l < layer_count(); ++l) {
        if (!grad_w[l].allFinite() || !grad_b[l].allFinite())
            throw std::runtime_error("train_step: non-finite gradient in layer " + std::to_string(l));
        weights_[l] -= learning_rate_ * grad_w[l];
        biases_[l] -= learning_rate_ * grad_b[l];
        if (!weights_[l].allFinite() || !biases_[l].allFinite())
            throw std::runtime_error("train_step: non-finite parameter in layer " + std::to_string(l));
    }
    if (!std::isfinite(loss)) throw std::runtime_error("train_step: non-finite loss");
    return loss;
}

nlohmann::json RewardModel::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (int l = 0; l < layer_count(); ++l) {
        std::vector<double> w(weights_[l].size());
        // row-major dump
        for (int r = 0; r < weights_[l].rows(); ++r)
            for (int c = 0; c < weights_[l].cols(); ++c)
                w[static_cast<std::size_t>(r) * weights_[l].cols() + c] = weights_[l](r, c);
        layers.push_back({{"rows", weights_[l].rows()},
                          {"cols", weights_[l].cols()},
                          {"w", w},
                          {"b", std::vector<double>(biases_[l].data(), biases_[l].data() + biases_[l].size())}});
    }
    return {{"input_dim", input_dim_},
            {"learning_rate", learning_rate_},
            {"target_mean", target_mean_},
            {"target_std", target_std_},
            {"layers", layers}};
}

RewardModel RewardModel::from_json(const nlohmann::json& j) {
    RewardModel m;
    m.input_dim_ = j.at("input_dim").get<int>();
    m.learning_rate_ = j.at("learning_rate").get<double>();
    m.target_mean_ = j.at("target_mean").get<double>();
    m.target_std_ = j.at("target_std").get<double>();
    for (const auto& layer : j.at("layers")) {
        const int rows = layer.at("rows").get<int>();
        const int cols = layer.at("cols").get<int>();
        const auto w = layer.at("w").get<std::vector<double>>();
        const auto b = layer.at("b").get<std::vector<double>>();
        Eigen::MatrixXd wm(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) wm(r, c) = w[static_cast<std::size_t>(r) * cols + c];
        m.weights_.push_back(std::move(wm));
        m.biases_.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<int>(b.size())));
    }
    return m;
}

}  // namespace cemrm
