#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "bbdm/bridge.hpp"
#include "bbdm/rng.hpp"

using namespace bbdm;

namespace {

StateVector scalar(double v) { return StateVector::Constant(1, v); }

StateVector random_vec(Rng& rng, int dim, double scale = 1.0) {
    StateVector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = scale * rng.normal();
    return v;
}

}  // namespace

TEST_CASE("forward_marginal endpoints and midpoint") {
    const BridgeSchedule sch(4, 1.0);
    const auto x0 = scalar(0.0), y = scalar(2.0);
    auto g = forward_marginal(sch, x0, y, 2);
    CHECK(g.mean[0] == doctest::Approx(1.0));
    CHECK(g.var == doctest::Approx(0.5));

    const StateVector a = (StateVector(3) << 1.0, -2.0, 3.5).finished();
    const StateVector b = (StateVector(3) << -4.0, 0.25, 9.0).finished();
    g = forward_marginal(sch, a, b, 0);
    CHECK(g.mean == a);
    CHECK(g.var == 0.0);
    g = forward_marginal(sch, a, b, 4);
    CHECK(g.mean == b);
    CHECK(g.var == 0.0);
    CHECK_THROWS_AS(forward_marginal(sch, a, scalar(1.0), 1), std::invalid_argument);
}

TEST_CASE("forward_sample") {
    const BridgeSchedule sch(4, 1.0);
    CHECK(forward_sample(sch, scalar(1.0), scalar(3.0), 4, scalar(0.7))[0] == 3.0);
    CHECK(forward_sample(sch, scalar(0.0), scalar(2.0), 2, scalar(1.0))[0] ==
          doctest::Approx(1.0 + std::sqrt(0.5)).epsilon(1e-14));

    Rng rng(7);
    const BridgeSchedule big(50, 2.0);
    for (int t = 0; t <= 50; ++t) {
        const auto x0 = random_vec(rng, 4), y = random_vec(rng, 4);
        const StateVector zero = StateVector::Zero(4);
        CHECK((forward_sample(big, x0, y, t, zero) - forward_marginal(big, x0, y, t).mean).norm() == 0.0);
    }
}

TEST_CASE("forward_transition") {
    const BridgeSchedule sch(4, 1.0);
    auto g = forward_transition(sch, scalar(0.75), scalar(1.0), 2);
    CHECK(g.mean[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-14));
    CHECK(g.var == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    g = forward_transition(sch, scalar(-3.0), scalar(1.25), 4);
    CHECK(g.mean[0] == 1.25);
    CHECK(g.var == 0.0);
    CHECK_THROWS_AS(forward_transition(sch, scalar(0.0), scalar(0.0), 0), std::out_of_range);
}

TEST_CASE("composing forward transitions reproduces the marginal") {
    Rng rng(11);
    for (int T : {4, 10, 37, 200}) {
        for (double s : {0.5, 1.0, 4.0}) {
            const BridgeSchedule sch(T, s);
            const auto x0 = random_vec(rng, 3, 2.0), y = random_vec(rng, 3, 2.0);
            // Linear-Gaussian propagation of (mean, var) from the point mass at x0.
            StateVector mean = x0;
            double var = 0.0;
            for (int t = 1; t <= T; ++t) {
                const auto step = forward_transition(sch, mean, y, t);
                const double r = sch.ratio(t);
                mean = step.mean;
                var = r * r * var + step.var;
                const auto marg = forward_marginal(sch, x0, y, t);
                CHECK((mean - marg.mean).cwiseAbs().maxCoeff() < 1e-9);
                CHECK(std::abs(var - marg.var) < 1e-9);
            }
        }
    }
}

TEST_CASE("posterior hand example and affine consistency") {
    const BridgeSchedule sch(4, 1.0);
    const auto g = posterior(sch, scalar(0.6), scalar(0.0), scalar(1.0), 2);
    CHECK(g.mean[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(g.var == doctest::Approx(0.25).epsilon(1e-14));

    Rng rng(3);
    for (int T : {3, 10, 1000}) {
        const BridgeSchedule s(T, 1.5);
        for (int t = 1; t < T; ++t) {
            const auto pc = posterior_coefficients(s, t);
            CHECK(std::abs(pc.a + pc.b + pc.c - 1.0) < 1e-12);
        }
        const double v = rng.normal();
        const int t = T / 2 + 1;
        CHECK(std::abs(posterior(s, scalar(v), scalar(v), scalar(v), t).mean[0] - v) < 1e-12);
    }
    CHECK_THROWS_AS(posterior(sch, scalar(0.0), scalar(0.0), scalar(0.0), 4), std::domain_error);
}

TEST_CASE("reverse_mean with the true target equals the posterior mean") {
    const BridgeSchedule sch(4, 1.0);
    const auto x0 = scalar(0.0), y = scalar(1.0), xt = scalar(0.6);
    const auto g = reverse_mean(sch, xt, y, xt - x0, 2);
    CHECK(g.mean[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(g.var == sch.posterior_var(2));

    const auto zero = reverse_mean(sch, xt, y, scalar(0.0), 2);
    CHECK(zero.mean[0] == doctest::Approx(sch.c_x(2) * 0.6 + sch.c_y(2) * 1.0));

    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const int T = static_cast<int>(rng.uniform_int(3, 500));
        const BridgeSchedule s(T, 0.25 + 4.0 * rng.uniform());
        const int t = static_cast<int>(rng.uniform_int(1, T - 1));
        const auto a = random_vec(rng, 5), b = random_vec(rng, 5), e = random_vec(rng, 5);
        const auto x_t = forward_sample(s, a, b, t, e);
        const auto target = loss_target(s, a, b, t, e);
        const auto via_eps = reverse_mean(s, x_t, b, target, t);
        const auto exact = posterior(s, x_t, a, b, t);
        CHECK((via_eps.mean - exact.mean).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(via_eps.var == exact.var);
    }
}

TEST_CASE("loss_target identities") {
    const BridgeSchedule sch(4, 1.0);
    CHECK(loss_target(sch, scalar(0.0), scalar(2.0), 2, scalar(0.0))[0] == doctest::Approx(1.0));
    Rng rng(5);
    const auto x0 = random_vec(rng, 6), y = random_vec(rng, 6), e = random_vec(rng, 6);
    CHECK(loss_target(sch, x0, y, 0, e).norm() == 0.0);

    const BridgeSchedule s(100, 1.0);
    for (int t = 0; t <= 100; ++t) {
        const auto target = loss_target(s, x0, y, t, e);
        const auto x_t = forward_sample(s, x0, y, t, e);
        // Algebraically exact; in floating point equal up to a few ulps.
        CHECK(((target + x0) - x_t).cwiseAbs().maxCoeff() < 1e-14 * (1.0 + x_t.cwiseAbs().maxCoeff()) * 8);
        const auto x0_hat = predict_x0(x_t, target);
        CHECK((x0_hat - x0).cwiseAbs().maxCoeff() < 1e-13);
    }
    CHECK(predict_x0(x0, StateVector::Zero(6)) == x0);
}

TEST_CASE("training_loss") {
    CHECK(training_loss(scalar(2.0), scalar(1.0)) == 1.0);
    Rng rng(1);
    const auto a = random_vec(rng, 17), b = random_vec(rng, 17);
    CHECK(training_loss(a, a) == 0.0);
    double naive = 0.0;
    for (int i = 0; i < 17; ++i) naive += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::abs(training_loss(a, b) - naive / 17.0) < 1e-12);
    CHECK_THROWS_AS(training_loss(a, scalar(0.0)), std::invalid_argument);
}

TEST_CASE("loss weights") {
    const BridgeSchedule sch(10, 1.0);
    CHECK(loss_weight(sch, 10, LossWeighting::kSimple) == 1.0);
    CHECK(loss_weight(sch, 3, LossWeighting::kWeighted) == sch.c_eps(3));
    CHECK(loss_weight(sch, 10, LossWeighting::kWeighted) == doctest::Approx(0.1));
}

TEST_CASE("forward_sample at t=T returns y bit-exactly") {
    Rng rng(2024);
    for (int T : {2, 7, 1000}) {
        const BridgeSchedule sch(T, 3.0);
        for (int trial = 0; trial < 50; ++trial) {
            const auto x0 = random_vec(rng, 8, 1e3), y = random_vec(rng, 8, 1e-3), e = random_vec(rng, 8, 50.0);
            const auto out = forward_sample(sch, x0, y, T, e);
            for (int i = 0; i < 8; ++i) CHECK(out[i] == y[i]);
        }
    }
}
