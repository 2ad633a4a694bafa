#include "bbdm/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "bbdm/csv.hpp"

namespace bbdm {

namespace {

double mean_pairwise_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < b.rows(); ++j) row += (a.row(i) - b.row(j)).norm();
        total += row;
    }
    return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double diversity(const std::vector<Eigen::MatrixXd>& sets, Eigen::Index k, SdForm form) {
    if (sets.empty()) throw std::invalid_argument("diversity: no sample sets");
    if (k < 1 || (form == SdForm::kSample && k < 2)) throw std::invalid_argument("diversity: k too small");
    const Eigen::Index dim = sets.front().cols();
    const double divisor = form == SdForm::kPopulation ? static_cast<double>(k) : static_cast<double>(k - 1);
    double total = 0.0;
    for (const auto& s : sets) {
        if (s.rows() != k) {
            throw std::invalid_argument("diversity: expected " + std::to_string(k) + " samples per input, got " +
                                        std::to_string(s.rows()));
        }
        if (s.cols() != dim) throw std::invalid_argument("diversity: dimension mismatch between sets");
        const Eigen::RowVectorXd mu = s.colwise().mean();
        const Eigen::RowVectorXd ss = (s.rowwise() - mu).array().square().colwise().sum();
        total += (ss / divisor).array().sqrt().mean();
    }
    return total / static_cast<double>(sets.size());
}

double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("energy_distance: empty sample set");
    if (a.cols() != b.cols()) throw std::invalid_argument("energy_distance: dimension mismatch");
    return 2.0 * mean_pairwise_distance(a, b) - mean_pairwise_distance(a, a) - mean_pairwise_distance(b, b);
}

Moments moments(const Eigen::MatrixXd& samples) {
    if (samples.rows() == 0) throw std::invalid_argument("moments: no samples");
    Moments m;
    m.mean = samples.colwise().mean().transpose();
    if (samples.rows() == 1) {
        m.var = Eigen::VectorXd::Zero(samples.cols());
        m.var_defined = false;
        return m;
    }
    const Eigen::MatrixXd centered = samples.rowwise() - m.mean.transpose();
    m.var = centered.array().square().colwise().sum().transpose() / static_cast<double>(samples.rows() - 1);
    return m;
}

void write_report_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "metric,value,n,seed\n";
    for (const auto& r : rows) out << r.metric << ',' << format_double(r.value) << ',' << r.n << ',' << r.seed << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace bbdm
