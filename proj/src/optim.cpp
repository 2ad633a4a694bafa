#include "bbdm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bbdm {

namespace {

void require_same_shapes(const std::vector<Matrix>& a, const std::vector<Matrix>& b, const char* what) {
    if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": tensor count mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) {
            throw std::invalid_argument(std::string(what) + ": shape mismatch");
        }
    }
}

std::vector<Matrix> zeros_like(const std::vector<Matrix>& params) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(Matrix::Zero(p.rows(), p.cols()));
    return out;
}

}  // namespace

AdamState make_adam_state(const std::vector<Matrix>& params, double beta1, double beta2, double eps) {
    AdamState s;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    s.m = zeros_like(params);
    s.v = zeros_like(params);
    return s;
}

void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads, AdamState& state, double lr) {
    require_same_shapes(params, grads, "adam_step");
    require_same_shapes(params, state.m, "adam_step");
    require_same_shapes(params, state.v, "adam_step");
    if (!std::isfinite(lr)) throw std::invalid_argument("adam_step: non-finite learning rate");
    for (const auto& g : grads) {
        if (!g.allFinite()) throw std::invalid_argument("adam_step: non-finite gradient");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i].cwiseProduct(grads[i]);
        const auto m_hat = state.m[i].array() / bc1;
        const auto v_hat = state.v[i].array() / bc2;
        params[i].array() -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
}

EmaState make_ema_state(const std::vector<Matrix>& params, double decay, std::int64_t start_step,
                        std::int64_t update_interval) {
    if (!(decay >= 0.0 && decay < 1.0)) throw std::invalid_argument("ema: decay must lie in [0, 1)");
    if (start_step < 0 || update_interval < 1) throw std::invalid_argument("ema: bad start step or interval");
    EmaState e;
    e.decay = decay;
    e.start_step = start_step;
    e.update_interval = update_interval;
    e.shadow = params;
    return e;
}

bool ema_update(EmaState& ema, const std::vector<Matrix>& params, std::int64_t step) {
    require_same_shapes(ema.shadow, params, "ema_update");
    if (step < ema.start_step || (step - ema.start_step) % ema.update_interval != 0) return false;
    if (!ema.primed) {
        ema.shadow = params;
        ema.primed = true;
        return true;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        ema.shadow[i] = ema.decay * ema.shadow[i] + (1.0 - ema.decay) * params[i];
    }
    return true;
}

void PlateauLrState::validate() const {
    if (!(min_lr > 0.0 && min_lr <= max_lr)) throw std::invalid_argument("plateau: need 0 < min_lr <= max_lr");
    if (!(current_lr >= min_lr && current_lr <= max_lr)) throw std::invalid_argument("plateau: lr outside bounds");
    if (!(factor > 0.0 && factor < 1.0)) throw std::invalid_argument("plateau: factor must lie in (0, 1)");
    if (patience < 0 || cooldown < 0) throw std::invalid_argument("plateau: negative patience or cooldown");
    if (!(threshold >= 0.0)) throw std::invalid_argument("plateau: negative threshold");
}

bool plateau_lr_step(PlateauLrState& s, double metric) {
    if (!std::isfinite(metric)) throw std::invalid_argument("plateau: non-finite metric");
    if (!s.has_best || metric < s.best * (1.0 - s.threshold)) {
        s.best = metric;
        s.has_best = true;
        s.num_bad = 0;
    } else {
        s.num_bad += 1;
    }
    if (s.cooldown_left > 0) {
        s.cooldown_left -= 1;
        s.num_bad = 0;
    }
    if (s.num_bad > s.patience) {
        const double reduced = std::max(s.current_lr * s.factor, s.min_lr);
        const bool changed = reduced < s.current_lr;
        s.current_lr = reduced;
        s.cooldown_left = s.cooldown;
        s.num_bad = 0;
        if (changed) s.reductions += 1;
        return changed;
    }
    return false;
}

}  // namespace bbdm
