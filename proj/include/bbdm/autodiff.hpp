#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace bbdm::ad {

using Matrix = Eigen::MatrixXd;

/// Handle to a node recorded on a Tape.
struct Var {
    std::size_t index = 0;
};

// Elementwise kernels shared by the tape and by tape-free inference.
Matrix silu(const Matrix& x);
Matrix silu_derivative(const Matrix& x);
/// x * w + b with b broadcast over rows.
Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b);

/// Reverse-mode automatic differentiation over dense matrices.
///
/// Operations append nodes in evaluation order; `backward` walks them in
/// reverse, accumulating adjoints into every node that depends on a parameter.
/// A tape is single-use: build, call backward once, read gradients.
class Tape {
public:
    Var constant(Matrix value);
    Var parameter(Matrix value);

    Var matmul(Var a, Var b);
    /// a + row, where `row` is 1 x cols(a) and is broadcast over rows.
    Var add_row(Var a, Var row);
    Var silu(Var a);
    Var sub(Var a, Var b);
    /// [a | b] along columns.
    Var concat_cols(Var a, Var b);
    /// Mean over rows of (row weight * mean over columns of a^2); result is 1 x 1.
    Var weighted_mean_square(Var a, const Eigen::VectorXd& row_weights);
    /// Mean of a^2 over all entries; result is 1 x 1.
    Var mean_square(Var a);

    /// Seeds d(root)/d(root) = 1; root must be 1 x 1.
    void backward(Var root);

    const Matrix& value(Var v) const { return nodes_.at(v.index).value; }
    const Matrix& grad(Var v) const { return nodes_.at(v.index).grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    Var push(Matrix value, bool requires_grad, std::function<void(Tape&, const Matrix&)> backward);
    void accumulate(Var v, const Matrix& g);
    bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }

    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        std::function<void(Tape&, const Matrix&)> backward;
    };
    std::vector<Node> nodes_;
};

}  // namespace bbdm::ad
