#include "bbdm/noise_predictor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bbdm/rng.hpp"

namespace bbdm {

Eigen::VectorXd time_embed(int t, int num_steps, int dim, double max_period) {
    if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("time_embed: dim must be positive and even");
    if (num_steps < 1 || t < 0 || t > num_steps) throw std::out_of_range("time_embed: t outside [0, T]");
    const int half = dim / 2;
    const double tau = 1000.0 * static_cast<double>(t) / static_cast<double>(num_steps);
    Eigen::VectorXd out(dim);
    for (int k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(max_period) * static_cast<double>(k) / static_cast<double>(half));
        out[k] = std::sin(tau * freq);
        out[half + k] = std::cos(tau * freq);
    }
    return out;
}

void MlpConfig::validate() const {
    if (data_dim < 1) throw std::invalid_argument("mlp: data_dim must be positive");
    if (embed_dim <= 0 || embed_dim % 2 != 0) throw std::invalid_argument("mlp: embed_dim must be positive and even");
    if (hidden.empty()) throw std::invalid_argument("mlp: need at least one hidden layer");
    for (int h : hidden) {
        if (h < 1) throw std::invalid_argument("mlp: hidden sizes must be positive");
    }
    if (!(max_period > 1.0)) throw std::invalid_argument("mlp: max_period must exceed 1");
}

bool all_finite(const std::vector<Matrix>& mats) {
    for (const auto& m : mats) {
        if (!m.allFinite()) return false;
    }
    return true;
}

NoisePredictor::NoisePredictor(MlpConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(init_seed, "init");
    Eigen::Index fan_in = config_.input_dim();
    for (int width : config_.hidden) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Matrix w(fan_in, width), b(1, width);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = bound * (2.0 * rng.uniform() - 1.0);
        for (Eigen::Index j = 0; j < b.cols(); ++j) b(0, j) = bound * (2.0 * rng.uniform() - 1.0);
        params_.push_back(std::move(w));
        params_.push_back(std::move(b));
        fan_in = width;
    }
    params_.push_back(Matrix::Zero(fan_in, config_.data_dim));
    params_.push_back(Matrix::Zero(1, config_.data_dim));
}

NoisePredictor::NoisePredictor(MlpConfig config, std::vector<Matrix> params) : config_(std::move(config)) {
    config_.validate();
    set_params(std::move(params));
}

void NoisePredictor::check_shapes(const std::vector<Matrix>& params) const {
    const std::size_t layers = config_.hidden.size() + 1;
    if (params.size() != 2 * layers) throw std::invalid_argument("mlp: wrong number of parameter tensors");
    Eigen::Index fan_in = config_.input_dim();
    for (std::size_t l = 0; l < layers; ++l) {
        const Eigen::Index fan_out = l + 1 < layers ? config_.hidden[l] : config_.data_dim;
        if (params[2 * l].rows() != fan_in || params[2 * l].cols() != fan_out || params[2 * l + 1].rows() != 1 ||
            params[2 * l + 1].cols() != fan_out) {
            throw std::invalid_argument("mlp: parameter shape mismatch in layer " + std::to_string(l));
        }
        fan_in = fan_out;
    }
}

void NoisePredictor::set_params(std::vector<Matrix> params) {
    check_shapes(params);
    if (!all_finite(params)) throw std::invalid_argument("mlp: non-finite parameters");
    params_ = std::move(params);
}

std::size_t NoisePredictor::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
    return n;
}

Matrix NoisePredictor::embed_rows(std::span<const int> t, int num_steps) const {
    Matrix emb(static_cast<Eigen::Index>(t.size()), config_.embed_dim);
    // Sampling batches share one t; reuse the previous row's embedding when t repeats.
    int last_t = -1;
    Eigen::VectorXd last;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] != last_t) {
            last = time_embed(t[i], num_steps, config_.embed_dim, config_.max_period);
            last_t = t[i];
        }
        emb.row(static_cast<Eigen::Index>(i)) = last.transpose();
    }
    return emb;
}

Matrix NoisePredictor::forward(const Matrix& x_t, std::span<const int> t, int num_steps) const {
    if (x_t.cols() != config_.data_dim) {
        throw std::invalid_argument("mlp: input has " + std::to_string(x_t.cols()) + " columns, model expects " +
                                    std::to_string(config_.data_dim));
    }
    if (static_cast<std::size_t>(x_t.rows()) != t.size()) throw std::invalid_argument("mlp: one t per row required");
    if (!all_finite(params_)) throw std::runtime_error("mlp: non-finite parameters");
    Matrix h(x_t.rows(), config_.input_dim());
    h << x_t, embed_rows(t, num_steps);
    const std::size_t layers = num_layers();
    for (std::size_t l = 0; l + 1 < layers; ++l) h = ad::silu(ad::affine(h, params_[2 * l], params_[2 * l + 1]));
    return ad::affine(h, params_[2 * (layers - 1)], params_[2 * (layers - 1) + 1]);
}

Matrix NoisePredictor::predict(const Matrix& x_t, int t, int num_steps) const {
    const std::vector<int> ts(static_cast<std::size_t>(x_t.rows()), t);
    return forward(x_t, ts, num_steps);
}

void NoisePredictor::check_batch(const TrainingBatch& batch) const {
    if (batch.x_t.rows() == 0) throw std::invalid_argument("mlp: empty batch");
    if (batch.x_t.cols() != config_.data_dim || batch.target.cols() != config_.data_dim ||
        batch.target.rows() != batch.x_t.rows() || batch.t.size() != static_cast<std::size_t>(batch.x_t.rows())) {
        throw std::invalid_argument("mlp: batch shape mismatch");
    }
    if (batch.weights.size() != 0 && batch.weights.size() != batch.x_t.rows()) {
        throw std::invalid_argument("mlp: weight count differs from batch size");
    }
}

namespace {

struct Graph {
    ad::Tape tape;
    ad::Var x;
    std::vector<ad::Var> params;
    ad::Var loss;
};

void build_graph(Graph& g, const std::vector<Matrix>& params, const Matrix& embedding, const TrainingBatch& batch,
                 bool params_trainable, bool input_trainable) {
    auto& tape = g.tape;
    g.x = input_trainable ? tape.parameter(batch.x_t) : tape.constant(batch.x_t);
    for (const auto& p : params) g.params.push_back(params_trainable ? tape.parameter(p) : tape.constant(p));
    ad::Var h = tape.concat_cols(g.x, tape.constant(embedding));
    const std::size_t layers = params.size() / 2;
    for (std::size_t l = 0; l < layers; ++l) {
        h = tape.add_row(tape.matmul(h, g.params[2 * l]), g.params[2 * l + 1]);
        if (l + 1 < layers) h = tape.silu(h);
    }
    const ad::Var diff = tape.sub(h, tape.constant(batch.target));
    const Eigen::VectorXd w =
        batch.weights.size() == 0 ? Eigen::VectorXd::Ones(batch.x_t.rows()) : Eigen::VectorXd(batch.weights);
    g.loss = tape.weighted_mean_square(diff, w);
}

}  // namespace

GradResult NoisePredictor::grad(const TrainingBatch& batch, int num_steps) const {
    check_batch(batch);
    Graph g;
    build_graph(g, params_, embed_rows(batch.t, num_steps), batch, true, false);
    GradResult out;
    out.loss = g.tape.value(g.loss)(0, 0);
    if (!std::isfinite(out.loss)) throw std::runtime_error("mlp: non-finite loss");
    g.tape.backward(g.loss);
    out.grads.reserve(g.params.size());
    for (auto v : g.params) out.grads.push_back(g.tape.grad(v));
    return out;
}

Matrix NoisePredictor::input_grad(const TrainingBatch& batch, int num_steps) const {
    check_batch(batch);
    Graph g;
    build_graph(g, params_, embed_rows(batch.t, num_steps), batch, false, true);
    g.tape.backward(g.loss);
    return g.tape.grad(g.x);
}

}  // namespace bbdm
