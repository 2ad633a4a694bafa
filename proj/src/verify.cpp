#include "bbdm/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>

#include "bbdm/gauss_oracle.hpp"
#include "bbdm/noise_predictor.hpp"
#include "bbdm/rng.hpp"
#include "bbdm/sampler.hpp"

namespace bbdm {

namespace {

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

FamilyResult finish(FamilyResult r, const Timer& timer) {
    r.seconds = timer.seconds();
    r.pass = r.cases > 0 && std::isfinite(r.worst) && r.worst <= r.tolerance;
    return r;
}

// NaN-propagating running maximum.
void track(double& worst, double err) {
    if (std::isnan(err) || err > worst) worst = err;
}

StateVector scalar(double v) { return StateVector::Constant(1, v); }

StateVector random_vector(Rng& rng, Eigen::Index dim, double sd) {
    StateVector v(dim);
    rng.fill_normal(v);
    return sd * v;
}

NoisePredictor randomized_net(const MlpConfig& cfg, Rng& rng) {
    NoisePredictor net(cfg, 1);
    auto p = net.params();
    for (auto& m : p)
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 0.3 * rng.normal();
    net.set_params(std::move(p));
    return net;
}

}  // namespace

bool VerifyReport::all_pass() const {
    return std::all_of(families.begin(), families.end(), [](const FamilyResult& f) { return f.pass; });
}

FamilyResult check_schedule_identities() {
    const Timer timer;
    FamilyResult r{"schedule identities", 0, 1e-12};
    for (int T : {2, 3, 10, 37, 1000}) {
        for (double s : {0.5, 1.0, 2.0, 4.0}) {
            const BridgeSchedule sch(T, s);
            track(r.worst, std::abs(sch.m(0)));
            track(r.worst, std::abs(sch.m(T) - 1.0));
            track(r.worst, std::abs(sch.delta(0)));
            track(r.worst, std::abs(sch.delta(T)));
            for (int t = 1; t <= T; ++t) {
                const double ratio = sch.ratio(t);
                track(r.worst, std::abs(sch.delta(t) - sch.delta(T - t)));
                track(r.worst, std::abs(sch.delta(t) - (ratio * ratio * sch.delta(t - 1) + sch.delta_cond(t))));
                if (t < T) {
                    track(r.worst, std::abs(sch.c_x(t) + sch.c_y(t) - 1.0));
                    if (t > 1) {
                        const double expect = sch.delta_cond(t) * sch.delta(t - 1) / sch.delta(t);
                        track(r.worst, std::abs(sch.posterior_var(t) - expect));
                    } else {
                        track(r.worst, std::abs(sch.posterior_var(t)));
                    }
                }
            }
            if (T % 2 == 0) track(r.worst, std::abs(sch.delta(T / 2) - s / 2.0));
            ++r.cases;
        }
    }
    return finish(r, timer);
}

FamilyResult check_posterior_vs_grid(const VerifyOptions& options) {
    const Timer timer;
    FamilyResult r{"posterior vs grid", 0, 1e-6};
    Rng rng(options.seed, "verify.posterior");
    for (int T : {4, 10, 50}) {
        for (double s : {0.5, 1.0, 2.0}) {
            const BridgeSchedule sch(T, s);
            for (int k = 0; k < 12; ++k) {
                const int t = static_cast<int>(rng.uniform_int(2, T - 1));
                const double x0 = 2.0 * rng.normal(), y = 2.0 * rng.normal();
                const double x_t = forward_sample(sch, scalar(x0), scalar(y), t, scalar(rng.normal()))[0];
                const auto grid = grid_bayes_posterior_auto(sch, t, x_t, x0, y);
                const auto exact = posterior(sch, scalar(x_t), scalar(x0), scalar(y), t);
                const auto step = options.reverse_mean(sch, scalar(x_t), scalar(y), scalar(x_t - x0), t);
                track(r.worst, std::abs(grid.mean - exact.mean[0]));
                track(r.worst, std::abs(grid.var - exact.var));
                track(r.worst, std::abs(grid.mean - step.mean[0]));
                track(r.worst, std::abs(grid.var - step.var));
                ++r.cases;
            }
        }
    }
    return finish(r, timer);
}

FamilyResult check_sign_convention(const VerifyOptions& options) {
    const Timer timer;
    FamilyResult r{"sign convention", 0, 1e-12};
    Rng rng(options.seed, "verify.sign");
    for (int T : {3, 10, 100, 1000}) {
        for (double s : {0.5, 1.0, 4.0}) {
            const BridgeSchedule sch(T, s);
            for (int k = 0; k < 10; ++k) {
                const int t = static_cast<int>(rng.uniform_int(1, T - 1));
                const Eigen::Index dim = rng.uniform_int(1, 4);
                const StateVector x0 = random_vector(rng, dim, 2.0), y = random_vector(rng, dim, 2.0);
                const StateVector eps = random_vector(rng, dim, 1.0);
                const StateVector x_t = forward_sample(sch, x0, y, t, eps);
                const StateVector target = loss_target(sch, x0, y, t, eps);
                const auto step = options.reverse_mean(sch, x_t, y, target, t);
                const auto exact = posterior(sch, x_t, x0, y, t);
                track(r.worst, (step.mean - exact.mean).cwiseAbs().maxCoeff());
                track(r.worst, std::abs(step.var - exact.var));
                ++r.cases;
            }
        }
    }
    return finish(r, timer);
}

FamilyResult check_gradients(const VerifyOptions& options) {
    const Timer timer;
    FamilyResult r{"gradient check", 0, 1e-4};
    const double h = 1e-5;
    const double floor = 1e-6;  // denominator floor for near-zero gradients
    const int per_layer = 60;
    MlpConfig cfg;
    cfg.data_dim = 2;
    cfg.hidden = {32, 32};
    cfg.embed_dim = 8;
    const int num_steps = 50;
    Rng rng(options.seed, "verify.grad");
    const auto net = randomized_net(cfg, rng);
    TrainingBatch batch;
    batch.x_t.resize(8, cfg.data_dim);
    batch.target.resize(8, cfg.data_dim);
    for (Eigen::Index i = 0; i < batch.x_t.size(); ++i) {
        batch.x_t.data()[i] = rng.normal();
        batch.target.data()[i] = rng.normal();
    }
    for (int i = 0; i < 8; ++i) batch.t.push_back(static_cast<int>(rng.uniform_int(1, num_steps)));
    const auto analytic = net.grad(batch, num_steps);

    auto loss_at = [&](const std::vector<Matrix>& p) { return NoisePredictor(cfg, p).grad(batch, num_steps).loss; };
    for (std::size_t layer = 0; layer < net.num_layers(); ++layer) {
        const std::size_t w = 2 * layer, b = w + 1;
        const Eigen::Index nw = net.params()[w].size(), total = nw + net.params()[b].size();
        const Eigen::Index checks = std::min<Eigen::Index>(total, per_layer);
        for (Eigen::Index c = 0; c < checks; ++c) {
            const Eigen::Index flat = total <= per_layer ? c : rng.uniform_int(0, total - 1);
            const std::size_t k = flat < nw ? w : b;
            const Eigen::Index idx = flat < nw ? flat : flat - nw;
            auto up = net.params(), down = net.params();
            up[k].data()[idx] += h;
            down[k].data()[idx] -= h;
            const double numeric = (loss_at(up) - loss_at(down)) / (2.0 * h);
            const double exact = analytic.grads[k].data()[idx];
            track(r.worst, std::abs(numeric - exact) / std::max({std::abs(numeric), std::abs(exact), floor}));
            ++r.cases;
        }
    }
    return finish(r, timer);
}

FamilyResult check_sampler_equivalence(const VerifyOptions& options) {
    const Timer timer;
    FamilyResult r{"sampler equivalence", 0, 0.0};
    Rng rng(options.seed, "verify.sampler");
    MlpConfig cfg;
    cfg.data_dim = 2;
    cfg.hidden = {16, 16};
    cfg.embed_dim = 8;
    const auto net = randomized_net(cfg, rng);
    for (int T : {2, 3, 17, 100}) {
        const BridgeSchedule sch(T, 1.0 + rng.uniform());
        Eigen::MatrixXd y(4, cfg.data_dim);
        for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
        SamplerPlan plan;
        plan.grid = make_grid(T, T);
        plan.eta = 1.0;
        plan.seed = options.seed + static_cast<std::uint64_t>(T);
        plan.record_trajectory = true;
        const auto fast = accelerated_sample(sch, net, y, plan);
        const auto slow = ancestral_sample(sch, net, y, plan.seed, true);
        track(r.worst, (fast.x0 - slow.x0).cwiseAbs().maxCoeff());
        for (std::size_t row = 0; row < slow.trajectories.size(); ++row) {
            const auto& a = fast.trajectories[row];
            const auto& b = slow.trajectories[row];
            if (a.t != b.t || a.states.size() != b.states.size()) {
                r.worst = INFINITY;
                continue;
            }
            for (std::size_t k = 0; k < a.states.size(); ++k) {
                track(r.worst, (a.states[k] - b.states[k]).cwiseAbs().maxCoeff());
            }
        }
        ++r.cases;
    }
    return finish(r, timer);
}

FamilyResult check_endpoint_exactness(const VerifyOptions& options) {
    const Timer timer;
    FamilyResult r{"endpoint exactness", 0, 0.0};
    Rng rng(options.seed, "verify.endpoint");
    for (int T : {2, 10, 1000}) {
        for (double s : {0.5, 4.0}) {
            const BridgeSchedule sch(T, s);
            for (int k = 0; k < 5; ++k) {
                const StateVector x0 = random_vector(rng, 3, 1e3), y = random_vector(rng, 3, 1e3);
                const StateVector eps = random_vector(rng, 3, 1e3);
                const StateVector at_end = forward_sample(sch, x0, y, T, eps);
                track(r.worst, at_end == y ? 0.0 : INFINITY);
                ++r.cases;
            }
        }
    }
    MlpConfig cfg;
    cfg.data_dim = 3;
    cfg.hidden = {8};
    cfg.embed_dim = 4;
    const auto net = randomized_net(cfg, rng);
    const BridgeSchedule sch(40, 1.0);
    Eigen::MatrixXd y(3, 3);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 10.0 * rng.normal();
    SamplerPlan plan;
    plan.grid = make_grid(40, 7);
    plan.eta = 0.5;
    plan.seed = options.seed;
    plan.record_trajectory = true;
    for (const auto& batch : {ancestral_sample(sch, net, y, options.seed, true), accelerated_sample(sch, net, y, plan)}) {
        for (std::size_t row = 0; row < batch.trajectories.size(); ++row) {
            const auto& tr = batch.trajectories[row];
            const bool ok = !tr.t.empty() && tr.t.front() == 40 &&
                            tr.states.front() == y.row(static_cast<Eigen::Index>(row)).transpose();
            track(r.worst, ok ? 0.0 : INFINITY);
            ++r.cases;
        }
    }
    return finish(r, timer);
}

VerifyReport run_verification(const VerifyOptions& options) {
    VerifyReport report;
    report.families.push_back(check_schedule_identities());
    report.families.push_back(check_posterior_vs_grid(options));
    report.families.push_back(check_sign_convention(options));
    report.families.push_back(check_gradients(options));
    report.families.push_back(check_sampler_equivalence(options));
    report.families.push_back(check_endpoint_exactness(options));
    return report;
}

void print_verify_report(std::ostream& out, const VerifyReport& report) {
    const auto flags = out.flags();
    out << std::left << std::setw(22) << "family" << std::right << std::setw(7) << "cases" << std::setw(12)
        << "tolerance" << std::setw(14) << "worst error" << "  result\n";
    for (const auto& f : report.families) {
        out << std::left << std::setw(22) << f.name << std::right << std::setw(7) << f.cases << std::setw(12)
            << std::setprecision(2) << std::scientific << f.tolerance << std::setw(14) << f.worst << "  "
            << (f.pass ? "PASS" : "FAIL") << '\n';
    }
    out.flags(flags);
    out << (report.all_pass() ? "all families PASS\n" : "verification FAILED\n");
}

}  // namespace bbdm
