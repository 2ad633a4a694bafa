#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bbdm/bridge.hpp"
#include "bbdm/checkpoint.hpp"
#include "bbdm/dataset.hpp"
#include "bbdm/noise_predictor.hpp"
#include "bbdm/optim.hpp"
#include "bbdm/rng.hpp"
#include "bbdm/schedule.hpp"

namespace bbdm {

struct TrainConfig {
    int num_steps = 1000;  // T
    double scale = 1.0;    // s
    int batch_size = 64;
    std::int64_t max_steps = 10000;
    std::optional<std::uint64_t> seed;
    MlpConfig mlp;
    LossWeighting weighting = LossWeighting::kSimple;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    double ema_decay = 0.995;
    std::int64_t ema_start = 30000;
    std::int64_t ema_interval = 16;

    double lr_max = 1.0e-4;
    double lr_min = 5.0e-7;
    double lr_factor = 0.5;
    std::int64_t lr_patience = 3000;  // in training steps
    std::int64_t lr_cooldown = 2000;  // in training steps
    double lr_threshold = 1.0e-4;

    std::int64_t checkpoint_interval = 0;  // 0: final checkpoint only
    std::int64_t validation_interval = 500;
    std::int64_t log_interval = 1;
    double val_fraction = 0.1;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
    std::uint64_t require_seed() const;
};

/// Draws t ~ U{1..T} and eps ~ N(0, I) for every pair (row) and builds the
/// regression batch x_t -> m_t (y - x0) + sqrt(delta_t) eps.
TrainingBatch make_training_batch(const BridgeSchedule& schedule, const Matrix& x0, const Matrix& y,
                                  LossWeighting weighting, Rng& rng);

/// One optimization step on the given pairs. Returns the loss before the update.
double train_step(NoisePredictor& model, AdamState& adam, const BridgeSchedule& schedule, const Matrix& x0,
                  const Matrix& y, Rng& rng, double lr, LossWeighting weighting = LossWeighting::kSimple);

/// Fixed held-out evaluation: every validation pair at t in {T/10, ..., 9T/10}
/// with noise drawn once from the seed.
class Validator {
public:
    Validator(const BridgeSchedule& schedule, const Matrix& x0, const Matrix& y, std::uint64_t seed);
    double loss(const NoisePredictor& model) const;
    bool empty() const { return batch_.x_t.rows() == 0; }

private:
    int num_steps_;
    TrainingBatch batch_;
};

/// Rows [0, n - n_val) train, the tail validates.
Eigen::Index validation_rows(Eigen::Index n, double val_fraction);

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(std::int64_t step, const std::string& msg)
        : std::runtime_error(msg), step_(step) {}
    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

struct TrainResult {
    Checkpoint final_state;
    std::filesystem::path checkpoint_path;
    std::filesystem::path metrics_path;
    std::vector<double> losses;  // one per step executed by this call
    std::vector<std::pair<std::int64_t, double>> val_losses;
};

Checkpoint initial_checkpoint(const TrainConfig& config, Eigen::Index data_dim);

/// Runs (or resumes) training and writes into `out_dir`:
///   metrics.csv                  step,loss,lr,val_loss
///   checkpoint_<step>.bbdm       every checkpoint_interval steps
///   model.bbdm                   final state
///   diverged.bbdm                state before a step whose loss was non-finite
///
/// On resume, metrics rows after the checkpoint step are dropped before appending.
TrainResult run_training(const TrainConfig& config, const PairedDataset& data, const std::filesystem::path& out_dir,
                         const std::optional<Checkpoint>& resume = std::nullopt);

}  // namespace bbdm
