#pragma once

#include <span>

#include "bbdm/eps_model.hpp"
#include "bbdm/schedule.hpp"

namespace bbdm {

/// Joint law of a scalar pair (x0, y): bivariate normal.
struct JointGaussianSpec {
    double mean0 = 0.0;
    double meany = 0.0;
    double var0 = 1.0;
    double vary = 1.0;
    double corr = 0.0;

    /// Throws std::invalid_argument unless var0, vary > 0 and corr in [-1, 1].
    void validate() const;
    double cov() const;
};

struct ScalarMoments {
    double mean = 0.0;
    double var = 0.0;
};

/// Posterior of x_{t-1} given (x_t, x0, y) computed by multiplying the forward
/// transition density and the forward marginal density on a uniform grid
/// (log-space accumulation, then normalization). Valid for 2 <= t <= T-1.
ScalarMoments grid_bayes_posterior(const BridgeSchedule& schedule, int t, double x_t, double x0, double y,
                                   double grid_lo, double grid_hi, int n_points);

/// Same as above but places the grid itself: a coarse pass over the prior
/// support of x_{t-1} locates the posterior, a second pass spans +-12 sd around it.
ScalarMoments grid_bayes_posterior_auto(const BridgeSchedule& schedule, int t, double x_t, double x0, double y,
                                        int n_points = 4001);

/// Minimum-MSE predictor of the noise target given x_t for jointly Gaussian data:
/// x_t - E[x0 | x_t].
double optimal_eps(const JointGaussianSpec& spec, const BridgeSchedule& schedule, int t, double x_t);

/// Runs the reverse recursion with the analytic predictor, from x_T = y down to x_0.
/// Consumes T-1 standard normal draws from `noise` in order.
double exact_reverse_chain(const JointGaussianSpec& spec, const BridgeSchedule& schedule, double y,
                           std::span<const double> noise);

/// `optimal_eps` applied independently to every coordinate.
class OracleEpsModel final : public EpsModel {
public:
    OracleEpsModel(JointGaussianSpec spec, const BridgeSchedule& schedule, Eigen::Index dim);

    Eigen::Index dim() const override { return dim_; }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x_t, int t, int num_steps) const override;

private:
    JointGaussianSpec spec_;
    BridgeSchedule schedule_;
    Eigen::Index dim_;
};

}  // namespace bbdm
