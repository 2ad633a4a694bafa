#pragma once

#include <Eigen/Core>

namespace bbdm {

/// Anything that predicts the bridge noise target from (x_t, t).
/// The conditioning point y is deliberately not an input.
class EpsModel {
public:
    virtual ~EpsModel() = default;

    virtual Eigen::Index dim() const = 0;

    /// Each row of `x_t` is one state; returns one prediction per row.
    virtual Eigen::MatrixXd predict(const Eigen::MatrixXd& x_t, int t, int num_steps) const = 0;
};

}  // namespace bbdm
