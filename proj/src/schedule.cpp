#include "bbdm/schedule.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bbdm {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ReverseCoefficients pair_coefficients(double m_prev, double delta_prev, double m_cur, double delta_cur) {
    if (!(delta_cur > 0.0)) {
        throw std::domain_error("pair_coefficients: delta at the later index must be positive");
    }
    const double r = (1.0 - m_cur) / (1.0 - m_prev);
    ReverseCoefficients c;
    c.delta_cond = delta_cur - delta_prev * r * r;
    c.posterior_var = c.delta_cond * delta_prev / delta_cur;
    c.c_x = (delta_prev / delta_cur) * r + (c.delta_cond / delta_cur) * (1.0 - m_prev);
    c.c_y = m_prev - m_cur * r * delta_prev / delta_cur;
    c.c_eps = (1.0 - m_prev) * c.delta_cond / delta_cur;
    return c;
}

BridgeSchedule::BridgeSchedule(int num_steps, double scale) : T_(num_steps), s_(scale) {
    if (num_steps < 2) {
        throw std::invalid_argument("schedule: T must be at least 2, got " + std::to_string(num_steps));
    }
    if (!std::isfinite(scale) || !(scale > 0.0)) {
        throw std::invalid_argument("schedule: s must be finite and positive");
    }
    const auto n = static_cast<std::size_t>(T_) + 1;
    m_.resize(n);
    delta_.resize(n);
    delta_cond_.assign(n, kNaN);
    posterior_var_.assign(n, kNaN);
    c_x_.assign(n, kNaN);
    c_y_.assign(n, kNaN);
    c_eps_.assign(n, kNaN);

    for (int t = 0; t <= T_; ++t) {
        const double mt = static_cast<double>(t) / static_cast<double>(T_);
        m_[t] = mt;
        delta_[t] = 2.0 * s_ * (mt - mt * mt);
    }
    // m_T is exactly 1 and delta_T exactly 0 by the arithmetic above.

    for (int t = 1; t < T_; ++t) {
        const auto c = pair_coefficients(m_[t - 1], delta_[t - 1], m_[t], delta_[t]);
        delta_cond_[t] = c.delta_cond;
        posterior_var_[t] = c.posterior_var;
        c_x_[t] = c.c_x;
        c_y_[t] = c.c_y;
        c_eps_[t] = c.c_eps;
    }
    // r_T = 0, so the last forward transition collapses onto y.
    const double r_last = (1.0 - m_[T_]) / (1.0 - m_[T_ - 1]);
    delta_cond_[T_] = delta_[T_] - delta_[T_ - 1] * r_last * r_last;
}

void BridgeSchedule::check_index(int t, int lo) const {
    if (t < lo || t > T_) {
        throw std::out_of_range("schedule: t=" + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                                std::to_string(T_) + "]");
    }
}

void BridgeSchedule::check_reverse(int t) const {
    check_index(t, 1);
    if (t == T_) {
        throw std::domain_error("schedule: reverse coefficients are degenerate at t=T (delta_T = 0)");
    }
}

double BridgeSchedule::m(int t) const {
    check_index(t, 0);
    return m_[t];
}

double BridgeSchedule::delta(int t) const {
    check_index(t, 0);
    return delta_[t];
}

double BridgeSchedule::delta_cond(int t) const {
    check_index(t, 1);
    return delta_cond_[t];
}

double BridgeSchedule::ratio(int t) const {
    check_index(t, 1);
    return (1.0 - m_[t]) / (1.0 - m_[t - 1]);
}

double BridgeSchedule::posterior_var(int t) const {
    check_reverse(t);
    return posterior_var_[t];
}

double BridgeSchedule::c_x(int t) const {
    check_reverse(t);
    return c_x_[t];
}

double BridgeSchedule::c_y(int t) const {
    check_reverse(t);
    return c_y_[t];
}

double BridgeSchedule::c_eps(int t) const {
    check_reverse(t);
    return c_eps_[t];
}

bool BridgeSchedule::is_degenerate(int t) const {
    check_index(t, 0);
    return t == 0 || t == T_;
}

ScheduleEntry BridgeSchedule::query(int t) const {
    check_index(t, 0);
    ScheduleEntry e;
    e.t = t;
    e.m = m_[t];
    e.delta = delta_[t];
    if (t >= 1) e.delta_cond = delta_cond_[t];
    if (t >= 1 && t < T_) {
        e.reverse = ReverseCoefficients{delta_cond_[t], posterior_var_[t], c_x_[t], c_y_[t], c_eps_[t]};
    }
    return e;
}

BridgeSchedule build_schedule(int num_steps, double scale) { return BridgeSchedule(num_steps, scale); }

}  // namespace bbdm
