#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "bbdm/bridge.hpp"
#include "bbdm/eps_model.hpp"
#include "bbdm/schedule.hpp"

namespace bbdm {

enum class SamplerMode { kAncestral, kAccelerated };

struct SamplerPlan {
    SamplerMode mode = SamplerMode::kAccelerated;
    std::vector<int> grid;  // strictly increasing, ends at T; ignored in ancestral mode
    double eta = 1.0;
    std::uint64_t seed = 0;
    bool record_trajectory = false;

    void validate(int num_steps) const;
};

/// States visited by one chain, from (T, y) down to (0, x0).
struct SampleTrajectory {
    std::vector<int> t;
    std::vector<StateVector> states;
};

struct SampleBatch {
    Eigen::MatrixXd x0;                          // one row per chain
    std::vector<SampleTrajectory> trajectories;  // empty unless recorded
};

/// S evenly spaced steps: tau_i = round(i T / S), i = 1..S.
std::vector<int> make_grid(int num_steps, int num_sample_steps);

/// Algorithm-2 chain for every row of `y`. Row r draws its noise from the
/// stream derive_seed(seed, "sample", r), one standard normal vector per move
/// that lands on t >= 1.
SampleBatch ancestral_sample(const BridgeSchedule& schedule, const EpsModel& model, const Eigen::MatrixXd& y,
                             std::uint64_t seed, bool record_trajectory = false);

/// Coarse-grid sampler over plan.grid with noise scale sigma^2 = eta * (posterior
/// variance of the grid pair). Consumes noise exactly like ancestral_sample on the
/// full grid, so plan (1..T, eta = 1) reproduces it bit for bit.
SampleBatch accelerated_sample(const BridgeSchedule& schedule, const EpsModel& model, const Eigen::MatrixXd& y,
                               const SamplerPlan& plan);

SampleBatch run_sampler(const BridgeSchedule& schedule, const EpsModel& model, const Eigen::MatrixXd& y,
                        const SamplerPlan& plan);

/// Columns t,dim_0,...,dim_{d-1}; one row per recorded step.
void write_trajectory_csv(const std::filesystem::path& path, const SampleTrajectory& trajectory);

}  // namespace bbdm
