#include "bbdm/bridge.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bbdm {

namespace {

void require_same_dim(const StateVector& a, const StateVector& b, const char* what) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    }
}

}  // namespace

GaussianParams forward_marginal(const BridgeSchedule& schedule, const StateVector& x0, const StateVector& y, int t) {
    require_same_dim(x0, y, "forward_marginal");
    const double m = schedule.m(t);
    return {(1.0 - m) * x0 + m * y, schedule.delta(t)};
}

StateVector forward_sample(const BridgeSchedule& schedule, const StateVector& x0, const StateVector& y, int t,
                           const StateVector& eps) {
    require_same_dim(x0, y, "forward_sample");
    require_same_dim(x0, eps, "forward_sample");
    const double m = schedule.m(t);
    const double sd = std::sqrt(schedule.delta(t));
    return (1.0 - m) * x0 + m * y + sd * eps;
}

GaussianParams forward_transition(const BridgeSchedule& schedule, const StateVector& x_prev, const StateVector& y,
                                  int t) {
    require_same_dim(x_prev, y, "forward_transition");
    const double r = schedule.ratio(t);
    const double cy = schedule.m(t) - r * schedule.m(t - 1);
    return {r * x_prev + cy * y, schedule.delta_cond(t)};
}

PosteriorCoefficients posterior_coefficients(const BridgeSchedule& schedule, int t) {
    PosteriorCoefficients pc;
    pc.c = schedule.c_y(t);  // rejects t = T and out-of-range t
    pc.a = schedule.ratio(t) * schedule.delta(t - 1) / schedule.delta(t);
    pc.b = (1.0 - schedule.m(t - 1)) * schedule.delta_cond(t) / schedule.delta(t);
    return pc;
}

GaussianParams posterior(const BridgeSchedule& schedule, const StateVector& x_t, const StateVector& x0,
                         const StateVector& y, int t) {
    require_same_dim(x_t, x0, "posterior");
    require_same_dim(x_t, y, "posterior");
    const auto pc = posterior_coefficients(schedule, t);
    return {pc.a * x_t + pc.b * x0 + pc.c * y, schedule.posterior_var(t)};
}

StateVector loss_target(const BridgeSchedule& schedule, const StateVector& x0, const StateVector& y, int t,
                        const StateVector& eps) {
    require_same_dim(x0, y, "loss_target");
    require_same_dim(x0, eps, "loss_target");
    return schedule.m(t) * (y - x0) + std::sqrt(schedule.delta(t)) * eps;
}

StateVector predict_x0(const StateVector& x_t, const StateVector& eps_pred) {
    require_same_dim(x_t, eps_pred, "predict_x0");
    return x_t - eps_pred;
}

GaussianParams reverse_mean(const BridgeSchedule& schedule, const StateVector& x_t, const StateVector& y,
                            const StateVector& eps_pred, int t) {
    require_same_dim(x_t, y, "reverse_mean");
    require_same_dim(x_t, eps_pred, "reverse_mean");
    return {schedule.c_x(t) * x_t + schedule.c_y(t) * y - schedule.c_eps(t) * eps_pred, schedule.posterior_var(t)};
}

double training_loss(const StateVector& eps_pred, const StateVector& target) {
    require_same_dim(eps_pred, target, "training_loss");
    if (eps_pred.size() == 0) throw std::invalid_argument("training_loss: empty vectors");
    return (eps_pred - target).squaredNorm() / static_cast<double>(eps_pred.size());
}

double loss_weight(const BridgeSchedule& schedule, int t, LossWeighting weighting) {
    if (weighting == LossWeighting::kSimple) return 1.0;
    const int T = schedule.num_steps();
    if (t == T) return 1.0 - schedule.m(T - 1);
    return schedule.c_eps(t);
}

}  // namespace bbdm
