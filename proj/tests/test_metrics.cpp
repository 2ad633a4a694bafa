#include "doctest.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bbdm/metrics.hpp"
#include "bbdm/rng.hpp"

using namespace bbdm;

namespace {

Eigen::MatrixXd normals(Rng& rng, Eigen::Index n, Eigen::Index d, double shift = 0.0) {
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal() + shift;
    return m;
}

// Energy distance between N(0,1) and N(mu,1) in 1-D: 2 E|Z + mu| - 2 E|Z'|, with
// Z ~ N(0, 2). E|N(mu, v)| is integrated numerically on a fine grid.
double gaussian_energy_distance(double mu) {
    auto mean_abs = [](double m, double var) {
        const double sd = std::sqrt(var), lo = m - 12 * sd, hi = m + 12 * sd;
        const int n = 200000;
        const double h = (hi - lo) / n;
        double total = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double x = lo + i * h;
            const double w = (i == 0 || i == n) ? 0.5 : 1.0;
            total += w * std::abs(x) * std::exp(-0.5 * (x - m) * (x - m) / var);
        }
        return total * h / std::sqrt(2.0 * std::numbers::pi * var);
    };
    return 2.0 * mean_abs(mu, 2.0) - 2.0 * mean_abs(0.0, 2.0);
}

}  // namespace

TEST_CASE("diversity conventions") {
    Eigen::MatrixXd same = Eigen::MatrixXd::Constant(5, 3, 2.0);
    CHECK(diversity({same, same}) == 0.0);

    Eigen::MatrixXd pair(2, 1);
    pair << 0.0, 2.0;
    CHECK(diversity({pair}, 2) == doctest::Approx(1.0));
    CHECK(diversity({pair}, 2, SdForm::kSample) == doctest::Approx(std::sqrt(2.0)));

    Rng rng(1);
    const auto a = normals(rng, 5, 4), b = normals(rng, 5, 4);
    const double d = diversity({a, b});
    const Eigen::MatrixXd shifted_a = a.rowwise() + Eigen::RowVectorXd::Constant(4, 3.0);
    CHECK(diversity({shifted_a, b}) == doctest::Approx(d).epsilon(1e-12));
    CHECK_THROWS_AS(diversity({a, normals(rng, 4, 4)}), std::invalid_argument);
    CHECK_THROWS_AS(diversity({pair}, 1, SdForm::kSample), std::invalid_argument);
}

TEST_CASE("energy distance identities") {
    Rng rng(2);
    const auto a = normals(rng, 60, 2), b = normals(rng, 50, 2, 0.5);
    CHECK(energy_distance(a, a) == 0.0);
    CHECK(energy_distance(a, b) == doctest::Approx(energy_distance(b, a)).epsilon(1e-12));
    CHECK(energy_distance(a, b) > 0.0);

    const double angle = 0.7;
    Eigen::Matrix2d rot;
    rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    const Eigen::MatrixXd ra = a * rot.transpose(), rb = b * rot.transpose();
    CHECK(energy_distance(ra, rb) == doctest::Approx(energy_distance(a, b)).epsilon(1e-10));
    CHECK_THROWS_AS(energy_distance(a, normals(rng, 3, 3)), std::invalid_argument);
    CHECK_THROWS_AS(energy_distance(Eigen::MatrixXd(0, 2), a), std::invalid_argument);
}

TEST_CASE("energy distance of shifted gaussians approaches the quadrature value") {
    Rng rng(3);
    const double mu = 1.0;
    const auto a = normals(rng, 3000, 1), b = normals(rng, 3000, 1, mu);
    const double expected = gaussian_energy_distance(mu);
    CHECK(expected == doctest::Approx(0.5418).epsilon(1e-3));
    CHECK(std::abs(energy_distance(a, b) - expected) < 0.03);
}

TEST_CASE("moments") {
    Eigen::MatrixXd one(1, 2);
    one << 1.0, 2.0;
    auto m = moments(one);
    CHECK_FALSE(m.var_defined);
    CHECK(m.var.isZero(0.0));
    CHECK(m.mean == one.row(0).transpose());

    m = moments(Eigen::MatrixXd::Constant(10, 3, 4.0));
    CHECK(m.var.isZero(0.0));

    Rng rng(4);
    const auto z = normals(rng, 1000000, 1);
    m = moments(z);
    CHECK(std::abs(m.mean[0]) < 0.004);
    CHECK(std::abs(m.var[0] - 1.0) < 0.006);
    CHECK_THROWS_AS(moments(Eigen::MatrixXd(0, 1)), std::invalid_argument);
}
