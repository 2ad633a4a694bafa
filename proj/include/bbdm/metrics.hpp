#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bbdm {

enum class SdForm { kPopulation, kSample };

/// Mean over inputs of the per-dimension standard deviation across each input's
/// k samples (rows of a set), averaged over dimensions.
double diversity(const std::vector<Eigen::MatrixXd>& sets, Eigen::Index k = 5, SdForm form = SdForm::kPopulation);

/// 2 E|a - b| - E|a - a'| - E|b - b'| with all-pairs means (V-statistic, so
/// identical sets give exactly 0).
double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct Moments {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;        // unbiased; zero when undefined
    bool var_defined = true;    // false for a single sample
};

Moments moments(const Eigen::MatrixXd& samples);

struct MetricRow {
    std::string metric;
    double value = 0.0;
    std::int64_t n = 0;
    std::uint64_t seed = 0;
};

/// CSV with header metric,value,n,seed.
void write_report_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

}  // namespace bbdm
