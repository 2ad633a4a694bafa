#include "bbdm/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <type_traits>
#include <stdexcept>

#include <zlib.h>

#include "bbdm/csv.hpp"
#include "bbdm/rng.hpp"

namespace bbdm {

namespace {

constexpr int kDatasetVersion = 1;

void require_rows(Eigen::Index n) {
    if (n < 1) throw std::invalid_argument("dataset: need at least one pair");
}

std::uint32_t crc_of(const std::string& s) {
    return static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

std::string data_section(const PairedDataset& d) {
    std::string out;
    const auto cols_x = indexed_columns("x_", d.dim()), cols_y = indexed_columns("y_", d.dim());
    for (std::size_t j = 0; j < cols_x.size(); ++j) out += (j ? "," : "") + cols_x[j];
    for (const auto& c : cols_y) out += "," + c;
    out += '\n';
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        for (Eigen::Index j = 0; j < d.dim(); ++j) {
            if (j) out += ',';
            out += format_double(d.x0(i, j));
        }
        for (Eigen::Index j = 0; j < d.dim(); ++j) {
            out += ',';
            out += format_double(d.y(i, j));
        }
        out += '\n';
    }
    return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    long long v = 0;
    unsigned long long u = 0;
    try {
        if constexpr (std::is_unsigned_v<Int>) {
            u = std::stoull(value, &pos);
        } else {
            v = std::stoll(value, &pos);
        }
    } catch (const std::exception&) {
        pos = 0;
    }
    if (value.empty() || pos != value.size()) throw std::runtime_error("dataset: bad value for '" + key + "'");
    if constexpr (std::is_unsigned_v<Int>) {
        return static_cast<Int>(u);
    } else {
        return static_cast<Int>(v);
    }
}

// Reads the '#' block and leaves `in` positioned at the first data byte.
DatasetHeader parse_header(std::istream& in, const std::filesystem::path& path) {
    DatasetHeader h;
    bool have_format = false, have_crc = false, have_dim = false, have_n = false;
    std::string line;
    while (in.peek() == '#') {
        std::getline(in, line);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error(path.string() + ": malformed header line '" + line + "'");
        const std::string key = line.substr(1, eq - 1), value = line.substr(eq + 1);
        if (key == "format") {
            if (value != "bbdm-paired") throw std::runtime_error(path.string() + ": unknown format '" + value + "'");
            have_format = true;
        } else if (key == "version") {
            h.version = parse_int<int>(key, value);
        } else if (key == "generator") {
            h.generator = value;
        } else if (key.rfind("param.", 0) == 0) {
            h.params[key.substr(6)] = value;
        } else if (key == "seed") {
            h.seed = parse_int<std::uint64_t>(key, value);
        } else if (key == "dim") {
            h.dim = parse_int<Eigen::Index>(key, value);
            have_dim = true;
        } else if (key == "n") {
            h.n = parse_int<Eigen::Index>(key, value);
            have_n = true;
        } else if (key == "crc32") {
            h.crc32 = parse_int<std::uint32_t>(key, value);
            have_crc = true;
        } else {
            throw std::runtime_error(path.string() + ": unknown header key '" + key + "'");
        }
    }
    if (!have_format || !have_crc || !have_dim || !have_n) {
        throw std::runtime_error(path.string() + ": incomplete header");
    }
    if (h.version != kDatasetVersion) {
        throw std::runtime_error(path.string() + ": unsupported version " + std::to_string(h.version));
    }
    if (h.dim < 1 || h.n < 1) throw std::runtime_error(path.string() + ": dim and n must be positive");
    return h;
}

}  // namespace

void PairedDataset::validate() const {
    require_rows(x0.rows());
    if (x0.cols() < 1) throw std::invalid_argument("dataset: dim must be positive");
    if (y.rows() != x0.rows() || y.cols() != x0.cols()) throw std::invalid_argument("dataset: x0 and y shapes differ");
    if (!x0.allFinite() || !y.allFinite()) throw std::invalid_argument("dataset: non-finite values");
    for (const auto& [k, v] : params) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw std::invalid_argument("dataset: parameter names and values must be single-line without '='");
        }
    }
}

PairedDataset gen_joint_gaussian(const JointGaussianSpec& spec, Eigen::Index dim, Eigen::Index n,
                                 std::uint64_t seed) {
    spec.validate();
    require_rows(n);
    if (dim < 1) throw std::invalid_argument("gen_joint_gaussian: dim must be positive");
    PairedDataset d;
    d.x0.resize(n, dim);
    d.y.resize(n, dim);
    Rng rng(seed, "joint_gaussian");
    const double sd0 = std::sqrt(spec.var0), sdy = std::sqrt(spec.vary);
    const double resid = std::sqrt(std::max(0.0, 1.0 - spec.corr * spec.corr));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double z1 = rng.normal(), z2 = rng.normal();
            d.x0(i, j) = spec.mean0 + sd0 * z1;
            d.y(i, j) = spec.meany + sdy * (spec.corr * z1 + resid * z2);
        }
    }
    d.generator = "joint_gaussian";
    d.params = {{"mean0", format_double(spec.mean0)}, {"meany", format_double(spec.meany)},
                {"var0", format_double(spec.var0)},   {"vary", format_double(spec.vary)},
                {"corr", format_double(spec.corr)}};
    d.seed = seed;
    return d;
}

Eigen::Vector2d moons_map(const Eigen::Vector2d& p) { return Eigen::Vector2d(-p.y(), -p.x()); }

PairedDataset gen_two_moons_paired(Eigen::Index n, double noise_sd, std::uint64_t seed) {
    require_rows(n);
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw std::invalid_argument("two_moons: noise_sd must be >= 0");
    PairedDataset d;
    d.x0.resize(n, 2);
    d.y.resize(n, 2);
    Rng rng(seed, "two_moons");
    for (Eigen::Index i = 0; i < n; ++i) {
        const double theta = std::numbers::pi * rng.uniform();
        const bool upper = rng.bernoulli(0.5);
        const Eigen::Vector2d clean = upper ? Eigen::Vector2d(std::cos(theta), std::sin(theta))
                                            : Eigen::Vector2d(1.0 - std::cos(theta), 0.5 - std::sin(theta));
        const Eigen::Vector2d jitter_x(rng.normal(), rng.normal());
        const Eigen::Vector2d jitter_y(rng.normal(), rng.normal());
        d.x0.row(i) = (clean + noise_sd * jitter_x).transpose();
        d.y.row(i) = (moons_map(clean) + noise_sd * jitter_y).transpose();
    }
    d.generator = "two_moons";
    d.params = {{"noise_sd", format_double(noise_sd)}};
    d.seed = seed;
    return d;
}

PairedDataset gen_binary_patterns(Eigen::Index n, int side, double flip_prob, std::uint64_t seed) {
    require_rows(n);
    if (side < 2 || side > 16) throw std::invalid_argument("binary_patterns: side must lie in [2, 16]");
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw std::invalid_argument("binary_patterns: flip_prob outside [0, 1]");
    const Eigen::Index dim = static_cast<Eigen::Index>(side) * side;
    PairedDataset d;
    d.x0.resize(n, dim);
    d.y.resize(n, dim);
    Rng rng(seed, "binary_patterns");
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double bit = rng.bernoulli(0.5) ? 1.0 : 0.0;
            const bool flip = rng.bernoulli(flip_prob);
            d.x0(i, j) = bit;
            d.y(i, j) = flip ? bit : 1.0 - bit;
        }
    }
    d.generator = "binary_patterns";
    d.params = {{"side", std::to_string(side)}, {"flip_prob", format_double(flip_prob)}};
    d.seed = seed;
    return d;
}

void save_dataset(const std::filesystem::path& path, const PairedDataset& data) {
    data.validate();
    const std::string body = data_section(data);
    std::ostringstream head;
    head << "#format=bbdm-paired\n#version=" << kDatasetVersion << "\n#generator=" << data.generator << '\n';
    for (const auto& [k, v] : data.params) head << "#param." << k << '=' << v << '\n';
    head << "#seed=" << data.seed << "\n#dim=" << data.dim() << "\n#n=" << data.size() << "\n#crc32=" << crc_of(body)
         << '\n';
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << head.str() << body;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

DatasetHeader read_dataset_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return parse_header(in, path);
}

PairedDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const DatasetHeader h = parse_header(in, path);
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (crc_of(body) != h.crc32) throw std::runtime_error(path.string() + ": checksum mismatch (corrupt or truncated)");

    std::istringstream lines(body);
    std::string line;
    std::getline(lines, line);
    const auto header_fields = split_fields(line);
    if (static_cast<Eigen::Index>(header_fields.size()) != 2 * h.dim) {
        throw std::runtime_error(path.string() + ": column header does not match dim");
    }
    PairedDataset d;
    d.x0.resize(h.n, h.dim);
    d.y.resize(h.n, h.dim);
    Eigen::Index i = 0;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        if (i >= h.n) throw std::runtime_error(path.string() + ": more rows than declared");
        const auto fields = split_fields(line);
        if (static_cast<Eigen::Index>(fields.size()) != 2 * h.dim) {
            throw std::runtime_error(path.string() + ": row " + std::to_string(i) + " has wrong field count");
        }
        for (Eigen::Index j = 0; j < h.dim; ++j) {
            d.x0(i, j) = parse_double(fields[static_cast<std::size_t>(j)]);
            d.y(i, j) = parse_double(fields[static_cast<std::size_t>(h.dim + j)]);
        }
        ++i;
    }
    if (i != h.n) throw std::runtime_error(path.string() + ": fewer rows than declared");
    d.generator = h.generator;
    d.params = h.params;
    d.seed = h.seed;
    return d;
}

}  // namespace bbdm
