#pragma once

#include <Eigen/Core>

#include "bbdm/schedule.hpp"

namespace bbdm {

/// A point in the translation space (x_0, y, x_t, noise, ...).
using StateVector = Eigen::VectorXd;

/// Isotropic Gaussian N(mean, var * I).
struct GaussianParams {
    StateVector mean;
    double var = 0.0;
};

enum class LossWeighting { kSimple, kWeighted };

/// Coefficients of the bridge posterior mean A*x_t + B*x0 + C*y.
struct PosteriorCoefficients {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

/// q(x_t | x0, y) = N((1 - m_t) x0 + m_t y, delta_t I), 0 <= t <= T.
GaussianParams forward_marginal(const BridgeSchedule& schedule, const StateVector& x0, const StateVector& y, int t);

/// x_t = (1 - m_t) x0 + m_t y + sqrt(delta_t) eps.
StateVector forward_sample(const BridgeSchedule& schedule, const StateVector& x0, const StateVector& y, int t,
                           const StateVector& eps);

/// q(x_t | x_{t-1}, y), 1 <= t <= T.
GaussianParams forward_transition(const BridgeSchedule& schedule, const StateVector& x_prev, const StateVector& y,
                                  int t);

/// Coefficients of q(x_{t-1} | x_t, x0, y); valid for 1 <= t <= T-1.
PosteriorCoefficients posterior_coefficients(const BridgeSchedule& schedule, int t);

/// q(x_{t-1} | x_t, x0, y); valid for 1 <= t <= T-1 (t = T is degenerate).
GaussianParams posterior(const BridgeSchedule& schedule, const StateVector& x_t, const StateVector& x0,
                         const StateVector& y, int t);

/// Regression target of the noise predictor: m_t (y - x0) + sqrt(delta_t) eps.
StateVector loss_target(const BridgeSchedule& schedule, const StateVector& x0, const StateVector& y, int t,
                        const StateVector& eps);

/// Inverts the target identity: x0_hat = x_t - eps_pred.
StateVector predict_x0(const StateVector& x_t, const StateVector& eps_pred);

/// Parametrized reverse step: mean c_x x_t + c_y y - c_eps eps_pred, variance posterior_var.
GaussianParams reverse_mean(const BridgeSchedule& schedule, const StateVector& x_t, const StateVector& y,
                            const StateVector& eps_pred, int t);

/// Mean squared error over dimensions.
double training_loss(const StateVector& eps_pred, const StateVector& target);

/// Per-timestep loss weight. kSimple is 1 everywhere; kWeighted uses c_eps[t],
/// with its t -> T limit (1 - m_{T-1}) at the degenerate endpoint.
double loss_weight(const BridgeSchedule& schedule, int t, LossWeighting weighting);

}  // namespace bbdm
