#include "bbdm/gauss_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbdm {

void JointGaussianSpec::validate() const {
    if (!std::isfinite(mean0) || !std::isfinite(meany)) {
        throw std::invalid_argument("joint gaussian: means must be finite");
    }
    if (!(var0 > 0.0) || !(vary > 0.0) || !std::isfinite(var0) || !std::isfinite(vary)) {
        throw std::invalid_argument("joint gaussian: variances must be finite and positive");
    }
    if (!(corr >= -1.0 && corr <= 1.0)) {
        throw std::invalid_argument("joint gaussian: corr must lie in [-1, 1]");
    }
}

double JointGaussianSpec::cov() const { return corr * std::sqrt(var0 * vary); }

namespace {

struct GridTerms {
    double r;             // forward transition slope
    double shift;         // transition offset (times y already applied)
    double var_cond;      // transition variance
    double prior_mean;    // marginal mean of x_{t-1}
    double prior_var;     // marginal variance of x_{t-1}
};

GridTerms grid_terms(const BridgeSchedule& schedule, int t, double x0, double y) {
    const int T = schedule.num_steps();
    if (t < 2 || t > T - 1) {
        throw std::out_of_range("grid_bayes_posterior: t must lie in [2, T-1], got " + std::to_string(t));
    }
    const double m_prev = schedule.m(t - 1);
    const double m_cur = schedule.m(t);
    GridTerms g;
    g.r = (1.0 - m_cur) / (1.0 - m_prev);
    g.shift = (m_cur - g.r * m_prev) * y;
    g.var_cond = schedule.delta(t) - schedule.delta(t - 1) * g.r * g.r;
    g.prior_mean = (1.0 - m_prev) * x0 + m_prev * y;
    g.prior_var = schedule.delta(t - 1);
    return g;
}

ScalarMoments integrate(const GridTerms& g, double x_t, double lo, double hi, int n) {
    if (n < 2 || !(hi > lo)) throw std::invalid_argument("grid_bayes_posterior: empty grid");
    const double h = (hi - lo) / static_cast<double>(n - 1);
    std::vector<double> logp(static_cast<std::size_t>(n));
    double max_log = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double u = lo + h * i;
        const double lik = x_t - (g.r * u + g.shift);
        const double pri = u - g.prior_mean;
        logp[i] = -0.5 * lik * lik / g.var_cond - 0.5 * pri * pri / g.prior_var;
        max_log = std::max(max_log, logp[i]);
    }
    if (!std::isfinite(max_log)) throw std::runtime_error("grid_bayes_posterior: zero total mass on grid");

    // Trapezoid weights; the density is negligible at both ends for a well placed grid.
    double mass = 0.0, first = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = std::exp(logp[i] - max_log) * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
        mass += w;
        first += w * (lo + h * i);
    }
    if (!(mass > 0.0)) throw std::runtime_error("grid_bayes_posterior: zero total mass on grid");
    const double mean = first / mass;
    double second = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = std::exp(logp[i] - max_log) * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
        const double d = (lo + h * i) - mean;
        second += w * d * d;
    }
    return {mean, second / mass};
}

}  // namespace

ScalarMoments grid_bayes_posterior(const BridgeSchedule& schedule, int t, double x_t, double x0, double y,
                                   double grid_lo, double grid_hi, int n_points) {
    if (n_points < 1000) throw std::invalid_argument("grid_bayes_posterior: need at least 1000 grid points");
    const auto g = grid_terms(schedule, t, x0, y);
    const auto mom = integrate(g, x_t, grid_lo, grid_hi, n_points);
    if (grid_hi - grid_lo < 8.0 * std::sqrt(mom.var)) {
        throw std::invalid_argument("grid_bayes_posterior: grid spans fewer than 8 posterior standard deviations");
    }
    return mom;
}

ScalarMoments grid_bayes_posterior_auto(const BridgeSchedule& schedule, int t, double x_t, double x0, double y,
                                        int n_points) {
    const auto g = grid_terms(schedule, t, x0, y);
    const double prior_sd = std::sqrt(g.prior_var);
    const double lik_peak = (x_t - g.shift) / g.r;
    const double lik_sd = std::sqrt(g.var_cond) / g.r;
    const double lo = std::min(g.prior_mean - 12.0 * prior_sd, lik_peak - 12.0 * lik_sd);
    const double hi = std::max(g.prior_mean + 12.0 * prior_sd, lik_peak + 12.0 * lik_sd);
    const auto coarse = integrate(g, x_t, lo, hi, 20001);
    const double sd = std::sqrt(coarse.var);
    return grid_bayes_posterior(schedule, t, x_t, x0, y, coarse.mean - 12.0 * sd, coarse.mean + 12.0 * sd, n_points);
}

double optimal_eps(const JointGaussianSpec& spec, const BridgeSchedule& schedule, int t, double x_t) {
    const double m = schedule.m(t);
    const double d = schedule.delta(t);
    const double c = spec.cov();
    const double mean_xt = (1.0 - m) * spec.mean0 + m * spec.meany;
    const double var_xt = (1.0 - m) * (1.0 - m) * spec.var0 + m * m * spec.vary + 2.0 * m * (1.0 - m) * c + d;
    if (!(var_xt > 0.0)) throw std::domain_error("optimal_eps: Var(x_t) is zero");
    const double cov_0t = (1.0 - m) * spec.var0 + m * c;
    const double e_x0 = spec.mean0 + cov_0t / var_xt * (x_t - mean_xt);
    return x_t - e_x0;
}

double exact_reverse_chain(const JointGaussianSpec& spec, const BridgeSchedule& schedule, double y,
                           std::span<const double> noise) {
    const int T = schedule.num_steps();
    if (noise.size() < static_cast<std::size_t>(T - 1)) {
        throw std::invalid_argument("exact_reverse_chain: need T-1 noise draws");
    }
    std::size_t k = 0;
    // x_T = y carries nothing beyond y: draw x_{T-1} from the bridge marginal at the predicted x0.
    double x = y;
    {
        const double x0_hat = x - optimal_eps(spec, schedule, T, x);
        const double m = schedule.m(T - 1);
        x = (1.0 - m) * x0_hat + m * y + std::sqrt(schedule.delta(T - 1)) * noise[k++];
    }
    for (int t = T - 1; t >= 1; --t) {
        const double eps = optimal_eps(spec, schedule, t, x);
        double next = schedule.c_x(t) * x + schedule.c_y(t) * y - schedule.c_eps(t) * eps;
        if (t > 1) next += std::sqrt(schedule.posterior_var(t)) * noise[k++];
        x = next;
    }
    return x;
}

OracleEpsModel::OracleEpsModel(JointGaussianSpec spec, const BridgeSchedule& schedule, Eigen::Index dim)
    : spec_(spec), schedule_(schedule), dim_(dim) {
    spec_.validate();
}

Eigen::MatrixXd OracleEpsModel::predict(const Eigen::MatrixXd& x_t, int t, int num_steps) const {
    if (x_t.cols() != dim_) throw std::invalid_argument("OracleEpsModel: dimension mismatch");
    if (num_steps != schedule_.num_steps()) throw std::invalid_argument("OracleEpsModel: schedule length mismatch");
    Eigen::MatrixXd out(x_t.rows(), x_t.cols());
    for (Eigen::Index j = 0; j < x_t.cols(); ++j) {
        for (Eigen::Index i = 0; i < x_t.rows(); ++i) out(i, j) = optimal_eps(spec_, schedule_, t, x_t(i, j));
    }
    return out;
}

}  // namespace bbdm
