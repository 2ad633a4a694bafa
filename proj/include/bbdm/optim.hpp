#pragma once

#include <cstdint>
#include <vector>

#include "bbdm/autodiff.hpp"

namespace bbdm {

using ad::Matrix;

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

/// Zero moments shaped like `params`.
AdamState make_adam_state(const std::vector<Matrix>& params, double beta1 = 0.9, double beta2 = 0.999,
                          double eps = 1e-8);

/// One bias-corrected Adam update in place.
void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads, AdamState& state, double lr);

/// Exponential moving average of parameters.
///
/// Updates happen only at steps >= start_step that are a multiple of
/// update_interval past start_step. The first eligible update copies the
/// parameters into the shadow; later ones blend with `decay`.
struct EmaState {
    double decay = 0.995;
    std::int64_t start_step = 30000;
    std::int64_t update_interval = 16;
    bool primed = false;
    std::vector<Matrix> shadow;
};

EmaState make_ema_state(const std::vector<Matrix>& params, double decay, std::int64_t start_step,
                        std::int64_t update_interval);

/// Returns true if the shadow changed.
bool ema_update(EmaState& ema, const std::vector<Matrix>& params, std::int64_t step);

/// Reduce-on-plateau learning-rate control (mode "min", relative threshold).
struct PlateauLrState {
    double current_lr = 1.0e-4;
    double max_lr = 1.0e-4;
    double min_lr = 5.0e-7;
    double factor = 0.5;
    std::int64_t patience = 3000;
    std::int64_t cooldown = 2000;
    double threshold = 1.0e-4;

    double best = 0.0;
    bool has_best = false;
    std::int64_t num_bad = 0;
    std::int64_t cooldown_left = 0;
    std::int64_t reductions = 0;

    void validate() const;
};

/// Feeds one metric observation. Returns true if the learning rate was reduced.
bool plateau_lr_step(PlateauLrState& state, double metric);

}  // namespace bbdm
