#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <Eigen/Core>

#include "bbdm/gauss_oracle.hpp"

namespace bbdm {

/// n pairs (x0_i, y_i); row i of `x0` is paired with row i of `y`.
struct PairedDataset {
    Eigen::MatrixXd x0;
    Eigen::MatrixXd y;
    std::string generator;
    std::map<std::string, std::string> params;
    std::uint64_t seed = 0;

    Eigen::Index size() const { return x0.rows(); }
    Eigen::Index dim() const { return x0.cols(); }
    void validate() const;
};

/// Metadata from the `#key=value` block of a dataset file.
struct DatasetHeader {
    int version = 0;
    std::string generator;
    std::map<std::string, std::string> params;
    std::uint64_t seed = 0;
    Eigen::Index dim = 0;
    Eigen::Index n = 0;
    std::uint32_t crc32 = 0;
};

/// Each coordinate of each pair is an independent draw from the scalar joint law.
PairedDataset gen_joint_gaussian(const JointGaussianSpec& spec, Eigen::Index dim, Eigen::Index n, std::uint64_t seed);

/// Reflection across the line y = -x (a quarter turn followed by a mirror): (a, b) -> (-b, -a).
Eigen::Vector2d moons_map(const Eigen::Vector2d& p);

/// x0 is a two-moons point plus N(0, noise_sd^2) jitter; y is moons_map of the clean
/// point plus independent jitter of the same scale.
PairedDataset gen_two_moons_paired(Eigen::Index n, double noise_sd, std::uint64_t seed);

/// side x side binary images, flattened row-major: x0 has iid Bernoulli(1/2) pixels,
/// y = 1 - x0 with each pixel flipped independently with probability flip_prob.
PairedDataset gen_binary_patterns(Eigen::Index n, int side, double flip_prob, std::uint64_t seed);

/// Text format:
///   #format=bbdm-paired
///   #version=1
///   #generator=<tag>
///   #param.<name>=<value>     (zero or more)
///   #seed=<u64>
///   #dim=<d>
///   #n=<n>
///   #crc32=<decimal crc32 of every byte after this line>
///   x_0,...,x_{d-1},y_0,...,y_{d-1}
///   <n rows of shortest round-trip decimal doubles>
void save_dataset(const std::filesystem::path& path, const PairedDataset& data);
PairedDataset load_dataset(const std::filesystem::path& path);
DatasetHeader read_dataset_header(const std::filesystem::path& path);

}  // namespace bbdm
