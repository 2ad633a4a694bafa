#include "bbdm/sampler.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "bbdm/csv.hpp"
#include "bbdm/rng.hpp"

namespace bbdm {

namespace {

using Eigen::MatrixXd;

class RowNoise {
public:
    RowNoise(std::uint64_t seed, Eigen::Index rows, Eigen::Index dim) : z_(rows, dim) {
        rngs_.reserve(static_cast<std::size_t>(rows));
        for (Eigen::Index r = 0; r < rows; ++r) rngs_.emplace_back(seed, "sample", static_cast<std::uint64_t>(r));
    }

    const MatrixXd& draw() {
        for (Eigen::Index r = 0; r < z_.rows(); ++r) {
            auto& rng = rngs_[static_cast<std::size_t>(r)];
            for (Eigen::Index j = 0; j < z_.cols(); ++j) z_(r, j) = rng.normal();
        }
        return z_;
    }

private:
    std::vector<Rng> rngs_;
    MatrixXd z_;
};

class Recorder {
public:
    Recorder(bool enabled, Eigen::Index rows) : enabled_(enabled) {
        if (enabled_) traj_.resize(static_cast<std::size_t>(rows));
    }

    void record(int t, const MatrixXd& x) {
        if (!x.allFinite()) throw std::runtime_error("sampler: non-finite state at t = " + std::to_string(t));
        if (!enabled_) return;
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            auto& tr = traj_[static_cast<std::size_t>(r)];
            tr.t.push_back(t);
            tr.states.push_back(x.row(r).transpose());
        }
    }

    std::vector<SampleTrajectory> take() { return std::move(traj_); }

private:
    bool enabled_;
    std::vector<SampleTrajectory> traj_;
};

void check_inputs(const EpsModel& model, const MatrixXd& y) {
    if (model.dim() != y.cols()) {
        throw std::invalid_argument("sampler: model dim " + std::to_string(model.dim()) + " differs from y dim " +
                                    std::to_string(y.cols()));
    }
    if (!y.allFinite()) throw std::invalid_argument("sampler: non-finite conditioning input");
}

MatrixXd predict_eps(const EpsModel& model, const MatrixXd& x, int t, int T) {
    MatrixXd eps = model.predict(x, t, T);
    if (eps.rows() != x.rows() || eps.cols() != x.cols()) throw std::runtime_error("sampler: model output shape");
    return eps;
}

// x_T = y carries nothing beyond y, so the first move samples the bridge
// marginal at the predicted x0: N((1 - m_a) x0_hat + m_a y, var).
MatrixXd degenerate_step(const BridgeSchedule& schedule, const MatrixXd& y, const MatrixXd& eps, int a, double var,
                         const MatrixXd& z) {
    const MatrixXd x0_hat = y - eps;  // x_T = y
    const double m = schedule.m(a);
    return (1.0 - m) * x0_hat + m * y + std::sqrt(var) * z;
}

}  // namespace

void SamplerPlan::validate(int num_steps) const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("sampler: eta must lie in [0, 1]");
    if (mode == SamplerMode::kAncestral) return;
    if (grid.empty()) throw std::invalid_argument("sampler: empty step grid");
    if (grid.back() != num_steps) throw std::invalid_argument("sampler: grid must end at T");
    if (grid.front() < 1) throw std::invalid_argument("sampler: grid entries must be >= 1");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (grid[i] <= grid[i - 1]) throw std::invalid_argument("sampler: grid must be strictly increasing");
    }
}

std::vector<int> make_grid(int num_steps, int num_sample_steps) {
    if (num_steps < 1) throw std::invalid_argument("make_grid: T must be positive");
    if (num_sample_steps < 1 || num_sample_steps > num_steps) {
        throw std::invalid_argument("make_grid: S must lie in [1, T], got " + std::to_string(num_sample_steps));
    }
    std::vector<int> grid;
    const auto T = static_cast<std::int64_t>(num_steps), S = static_cast<std::int64_t>(num_sample_steps);
    for (std::int64_t i = 1; i <= S; ++i) {
        const auto t = static_cast<int>((2 * i * T + S) / (2 * S));  // round half up
        if (grid.empty() || grid.back() != t) grid.push_back(t);
    }
    return grid;
}

SampleBatch ancestral_sample(const BridgeSchedule& schedule, const EpsModel& model, const MatrixXd& y,
                             std::uint64_t seed, bool record_trajectory) {
    check_inputs(model, y);
    const int T = schedule.num_steps();
    RowNoise noise(seed, y.rows(), y.cols());
    Recorder rec(record_trajectory, y.rows());

    MatrixXd x = y;
    rec.record(T, x);
    x = degenerate_step(schedule, y, predict_eps(model, x, T, T), T - 1, schedule.delta(T - 1), noise.draw());
    rec.record(T - 1, x);
    for (int t = T - 1; t >= 1; --t) {
        const MatrixXd eps = predict_eps(model, x, t, T);
        MatrixXd next = schedule.c_x(t) * x + schedule.c_y(t) * y - schedule.c_eps(t) * eps;
        if (t > 1) next += std::sqrt(schedule.posterior_var(t)) * noise.draw();
        x = std::move(next);
        rec.record(t - 1, x);
    }
    return SampleBatch{std::move(x), rec.take()};
}

SampleBatch accelerated_sample(const BridgeSchedule& schedule, const EpsModel& model, const MatrixXd& y,
                               const SamplerPlan& plan) {
    check_inputs(model, y);
    plan.validate(schedule.num_steps());
    const int T = schedule.num_steps();
    RowNoise noise(plan.seed, y.rows(), y.cols());
    Recorder rec(plan.record_trajectory, y.rows());
    const auto& grid = plan.grid;

    MatrixXd x = y;
    rec.record(T, x);
    for (std::size_t s = grid.size(); s-- > 0;) {
        const int b = grid[s];
        const int a = s > 0 ? grid[s - 1] : 0;
        const MatrixXd eps = predict_eps(model, x, b, T);
        if (a == 0) {
            x = x - eps;
        } else if (b == T) {
            x = degenerate_step(schedule, y, eps, a, plan.eta * schedule.delta(a), noise.draw());
        } else {
            const auto c = pair_coefficients(schedule.m(a), schedule.delta(a), schedule.m(b), schedule.delta(b));
            const MatrixXd& z = noise.draw();
            if (plan.eta == 1.0) {
                x = c.c_x * x + c.c_y * y - c.c_eps * eps + std::sqrt(c.posterior_var) * z;
            } else {
                const double sigma2 = plan.eta * c.posterior_var;
                const double room = schedule.delta(a) - sigma2;
                if (room < 0.0) throw std::logic_error("sampler: sigma^2 exceeds delta at the target step");
                const double k = std::sqrt(room) / std::sqrt(schedule.delta(b));
                const double m_a = schedule.m(a), m_b = schedule.m(b);
                const MatrixXd x0_hat = x - eps;
                x = (1.0 - m_a) * x0_hat + m_a * y + k * (x - (1.0 - m_b) * x0_hat - m_b * y) + std::sqrt(sigma2) * z;
            }
        }
        rec.record(a, x);
    }
    return SampleBatch{std::move(x), rec.take()};
}

SampleBatch run_sampler(const BridgeSchedule& schedule, const EpsModel& model, const MatrixXd& y,
                        const SamplerPlan& plan) {
    plan.validate(schedule.num_steps());
    if (plan.mode == SamplerMode::kAncestral) {
        return ancestral_sample(schedule, model, y, plan.seed, plan.record_trajectory);
    }
    return accelerated_sample(schedule, model, y, plan);
}

void write_trajectory_csv(const std::filesystem::path& path, const SampleTrajectory& trajectory) {
    const Eigen::Index d = trajectory.states.empty() ? 0 : trajectory.states.front().size();
    MatrixXd values(static_cast<Eigen::Index>(trajectory.states.size()), d + 1);
    for (std::size_t i = 0; i < trajectory.states.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        values(r, 0) = trajectory.t[i];
        values.row(r).tail(d) = trajectory.states[i].transpose();
    }
    auto cols = indexed_columns("dim_", d);
    cols.insert(cols.begin(), "t");
    write_numeric_csv(path, cols, values);
}

}  // namespace bbdm
