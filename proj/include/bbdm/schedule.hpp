#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace bbdm {

/// Reverse-step quantities for a pair of time indices (prev < cur).
///
/// x_prev | x_cur, x0, y  ~  N(c_x*x_cur + c_y*y - c_eps*(x_cur - x0), posterior_var)
struct ReverseCoefficients {
    double delta_cond = 0.0;     // forward transition variance prev -> cur
    double posterior_var = 0.0;  // variance of x_prev given x_cur, x0, y
    double c_x = 0.0;
    double c_y = 0.0;
    double c_eps = 0.0;
};

/// Computes the bridge posterior coefficients between two arbitrary time
/// indices of a schedule. Requires delta at `cur` to be non-zero.
ReverseCoefficients pair_coefficients(double m_prev, double delta_prev, double m_cur, double delta_cur);

struct ScheduleEntry {
    int t = 0;
    double m = 0.0;
    double delta = 0.0;
    /// Present for t >= 1.
    std::optional<double> delta_cond;
    /// Present for 1 <= t <= T-1; absent (degenerate) at t = T where delta_T = 0.
    std::optional<ReverseCoefficients> reverse;

    bool degenerate() const { return !reverse.has_value(); }
};

/// Precomputed Brownian bridge schedule with m_t = t/T and delta_t = 2s(m_t - m_t^2).
///
/// All arrays have length T+1 and are indexed by t. Entries that are undefined
/// (transition quantities at t = 0, reverse coefficients at t = T) hold NaN;
/// `is_degenerate(t)` reports the reverse-coefficient case.
class BridgeSchedule {
public:
    BridgeSchedule(int num_steps, double scale);

    int num_steps() const { return T_; }
    double scale() const { return s_; }

    double m(int t) const;
    double delta(int t) const;
    double delta_cond(int t) const;
    double posterior_var(int t) const;
    double c_x(int t) const;
    double c_y(int t) const;
    double c_eps(int t) const;
    /// r_t = (1 - m_t) / (1 - m_{t-1}), t >= 1.
    double ratio(int t) const;

    bool is_degenerate(int t) const;
    ScheduleEntry query(int t) const;

    const std::vector<double>& m_values() const { return m_; }
    const std::vector<double>& delta_values() const { return delta_; }

private:
    void check_index(int t, int lo) const;
    void check_reverse(int t) const;

    int T_;
    double s_;
    std::vector<double> m_;
    std::vector<double> delta_;
    std::vector<double> delta_cond_;
    std::vector<double> posterior_var_;
    std::vector<double> c_x_;
    std::vector<double> c_y_;
    std::vector<double> c_eps_;
};

BridgeSchedule build_schedule(int num_steps, double scale);

}  // namespace bbdm
