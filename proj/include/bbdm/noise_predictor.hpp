#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bbdm/autodiff.hpp"
#include "bbdm/eps_model.hpp"

namespace bbdm {

using ad::Matrix;

/// Sinusoidal embedding of t on a 1000-step scale (tau = 1000 t / T):
/// [sin(tau f_0), ..., sin(tau f_{h-1}), cos(tau f_0), ..., cos(tau f_{h-1})]
/// with f_k = max_period^(-k/h), h = dim/2.
Eigen::VectorXd time_embed(int t, int num_steps, int dim, double max_period = 10000.0);

struct MlpConfig {
    Eigen::Index data_dim = 1;
    std::vector<int> hidden{64, 64};
    int embed_dim = 16;
    double max_period = 10000.0;

    void validate() const;
    Eigen::Index input_dim() const { return data_dim + embed_dim; }
};

/// One training example set: rows of x_t and target share an index with `t`.
struct TrainingBatch {
    Matrix x_t;
    Matrix target;
    std::vector<int> t;
    Eigen::VectorXd weights;  // empty means unit weights
};

struct GradResult {
    double loss = 0.0;
    std::vector<Matrix> grads;  // same layout as NoisePredictor::params()
};

/// Fully connected eps_theta(x_t, t): input [x_t | time_embed(t)], SiLU hidden
/// layers, linear output of size data_dim.
///
/// Parameters are stored as [W_0, b_0, W_1, b_1, ...] with W_l of shape
/// (fan_in x fan_out) and b_l of shape (1 x fan_out).
class NoisePredictor final : public EpsModel {
public:
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for hidden layers, zeros for the output layer.
    NoisePredictor(MlpConfig config, std::uint64_t init_seed);
    NoisePredictor(MlpConfig config, std::vector<Matrix> params);

    const MlpConfig& config() const { return config_; }
    Eigen::Index dim() const override { return config_.data_dim; }
    std::size_t num_layers() const { return params_.size() / 2; }
    std::size_t parameter_count() const;

    const std::vector<Matrix>& params() const { return params_; }
    std::vector<Matrix>& mutable_params() { return params_; }
    void set_params(std::vector<Matrix> params);

    /// Per-row timesteps.
    Matrix forward(const Matrix& x_t, std::span<const int> t, int num_steps) const;
    Matrix predict(const Matrix& x_t, int t, int num_steps) const override;

    /// Loss = mean over rows of weight_i * mean_j (eps_theta - target)^2, and its parameter gradient.
    GradResult grad(const TrainingBatch& batch, int num_steps) const;

    /// Gradient with respect to the x_t input (used to check the embedding/concat path).
    Matrix input_grad(const TrainingBatch& batch, int num_steps) const;

private:
    Matrix embed_rows(std::span<const int> t, int num_steps) const;
    void check_shapes(const std::vector<Matrix>& params) const;
    void check_batch(const TrainingBatch& batch) const;

    MlpConfig config_;
    std::vector<Matrix> params_;
};

bool all_finite(const std::vector<Matrix>& mats);

}  // namespace bbdm
