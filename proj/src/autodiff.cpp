#include "bbdm/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace bbdm::ad {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Matrix silu(const Matrix& x) {
    return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

Matrix silu_derivative(const Matrix& x) {
    return x.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
    });
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
    Matrix out = x * w;
    out.rowwise() += b.row(0);
    return out;
}

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, const Matrix&)> backward) {
    Node n;
    if (requires_grad) n.grad = Matrix::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
    auto& n = nodes_.at(v.index);
    if (n.requires_grad) n.grad += g;
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::matmul(Var a, Var b) {
    require(value(a).cols() == value(b).rows(), "matmul: inner dimensions differ");
    Matrix out = value(a) * value(b);
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b](Tape& tape, const Matrix& g) {
        if (tape.requires_grad(a)) tape.accumulate(a, g * tape.value(b).transpose());
        if (tape.requires_grad(b)) tape.accumulate(b, tape.value(a).transpose() * g);
    });
}

Var Tape::add_row(Var a, Var row) {
    require(value(row).rows() == 1 && value(row).cols() == value(a).cols(), "add_row: shape mismatch");
    Matrix out = value(a);
    out.rowwise() += value(row).row(0);
    const bool rg = requires_grad(a) || requires_grad(row);
    return push(std::move(out), rg, [a, row](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g);
        if (tape.requires_grad(row)) tape.accumulate(row, g.colwise().sum());
    });
}

Var Tape::silu(Var a) {
    Matrix out = ad::silu(value(a));
    return push(std::move(out), requires_grad(a), [a](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g.cwiseProduct(silu_derivative(tape.value(a))));
    });
}

Var Tape::sub(Var a, Var b) {
    require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "sub: shape mismatch");
    Matrix out = value(a) - value(b);
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g);
        tape.accumulate(b, -g);
    });
}

Var Tape::concat_cols(Var a, Var b) {
    require(value(a).rows() == value(b).rows(), "concat_cols: row counts differ");
    const auto ca = value(a).cols(), cb = value(b).cols();
    Matrix out(value(a).rows(), ca + cb);
    out << value(a), value(b);
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b, ca, cb](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g.leftCols(ca));
        tape.accumulate(b, g.rightCols(cb));
    });
}

Var Tape::weighted_mean_square(Var a, const Eigen::VectorXd& row_weights) {
    const Matrix& x = value(a);
    require(row_weights.size() == x.rows(), "weighted_mean_square: weight count differs from rows");
    require(x.size() > 0, "weighted_mean_square: empty input");
    const double scale = 1.0 / static_cast<double>(x.size());
    Matrix out(1, 1);
    out(0, 0) = scale * (x.array().square().rowwise().sum().matrix().cwiseProduct(row_weights)).sum();
    return push(std::move(out), requires_grad(a), [a, row_weights, scale](Tape& tape, const Matrix& g) {
        Matrix d = (2.0 * scale * g(0, 0)) * tape.value(a);
        d.array().colwise() *= row_weights.array();
        tape.accumulate(a, d);
    });
}

Var Tape::mean_square(Var a) { return weighted_mean_square(a, Eigen::VectorXd::Ones(value(a).rows())); }

void Tape::backward(Var root) {
    auto& r = nodes_.at(root.index);
    require(r.value.rows() == 1 && r.value.cols() == 1, "backward: root must be a scalar");
    if (!r.requires_grad) return;
    r.grad.setOnes();
    for (std::size_t i = root.index + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.requires_grad || !n.backward) continue;
        n.backward(*this, n.grad);
    }
}

}  // namespace bbdm::ad
