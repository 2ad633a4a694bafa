#include "bbdm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "bbdm/csv.hpp"

namespace bbdm {

namespace {

// Known keys and their defaults. "" means unset.
const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"seed", ""},
        {"T", "1000"},
        {"s", "1"},
        {"output_dir", ""},
        // data
        {"dataset", ""},
        {"data_generator", ""},
        {"data_n", "10000"},
        {"data_dim", "1"},
        {"data_seed", ""},
        {"data_mean0", "0"},
        {"data_meany", "0"},
        {"data_var0", "1"},
        {"data_vary", "1"},
        {"data_corr", "0.8"},
        {"data_noise_sd", "0.05"},
        {"data_side", "4"},
        {"data_flip_prob", "0.05"},
        // model
        {"hidden", "64,64"},
        {"embed_dim", "16"},
        {"max_period", "10000"},
        // training
        {"batch_size", "64"},
        {"max_steps", "10000"},
        {"loss_weighting", "simple"},
        {"adam_beta1", "0.9"},
        {"adam_beta2", "0.999"},
        {"adam_eps", "1e-8"},
        {"lr_max", "1e-4"},
        {"lr_min", "5e-7"},
        {"lr_factor", "0.5"},
        {"lr_patience", "3000"},
        {"lr_cooldown", "2000"},
        {"lr_threshold", "1e-4"},
        {"ema_decay", "0.995"},
        {"ema_start", "30000"},
        {"ema_interval", "16"},
        {"checkpoint_interval", "0"},
        {"validation_interval", "500"},
        {"log_interval", "1"},
        {"val_fraction", "0.1"},
        // sampling and evaluation
        {"sampler", "accelerated"},
        {"sample_steps", "200"},
        {"eta", "1"},
        {"n_samples", "100"},
        {"k", "5"},
        {"use_ema", "true"},
        {"trajectories", "false"},
    };
    return d;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config::Config() : values_(defaults()) {}

void Config::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    parse(text.str(), path.string());
}

void Config::parse(const std::string& text, const std::string& origin) {
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void Config::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = value;
}

bool Config::is_set(const std::string& key) const { return !get(key).empty(); }

const std::string& Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
    return it->second;
}

std::string Config::require(const std::string& key) const {
    if (!is_set(key)) throw ConfigError("missing required key '" + key + "'");
    return get(key);
}

double Config::get_double(const std::string& key) const {
    try {
        return parse_double(require(key));
    } catch (const std::invalid_argument&) {
        throw ConfigError("key '" + key + "': '" + get(key) + "' is not a number");
    }
}

std::int64_t Config::get_int(const std::string& key) const {
    const std::string v = require(key);
    std::int64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
    }
    return out;
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string v = require(key);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("key '" + key + "': '" + v + "' is not a non-negative integer");
    }
    return out;
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = require(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (auto field : split_fields(require(key))) {
        const std::string f = trim(std::string(field));
        int v = 0;
        const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
        if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size()) {
            throw ConfigError("key '" + key + "': '" + get(key) + "' is not a comma-separated integer list");
        }
        out.push_back(v);
    }
    return out;
}

TrainConfig to_train_config(const Config& c) {
    TrainConfig t;
    t.num_steps = static_cast<int>(c.get_int("T"));
    t.scale = c.get_double("s");
    t.batch_size = static_cast<int>(c.get_int("batch_size"));
    t.max_steps = c.get_int("max_steps");
    if (c.is_set("seed")) t.seed = c.get_u64("seed");
    t.mlp.hidden = c.get_int_list("hidden");
    t.mlp.embed_dim = static_cast<int>(c.get_int("embed_dim"));
    t.mlp.max_period = c.get_double("max_period");
    const std::string w = c.get("loss_weighting");
    if (w == "simple") {
        t.weighting = LossWeighting::kSimple;
    } else if (w == "weighted") {
        t.weighting = LossWeighting::kWeighted;
    } else {
        throw ConfigError("key 'loss_weighting': expected 'simple' or 'weighted', got '" + w + "'");
    }
    t.adam_beta1 = c.get_double("adam_beta1");
    t.adam_beta2 = c.get_double("adam_beta2");
    t.adam_eps = c.get_double("adam_eps");
    t.lr_max = c.get_double("lr_max");
    t.lr_min = c.get_double("lr_min");
    t.lr_factor = c.get_double("lr_factor");
    t.lr_patience = c.get_int("lr_patience");
    t.lr_cooldown = c.get_int("lr_cooldown");
    t.lr_threshold = c.get_double("lr_threshold");
    t.ema_decay = c.get_double("ema_decay");
    t.ema_start = c.get_int("ema_start");
    t.ema_interval = c.get_int("ema_interval");
    t.checkpoint_interval = c.get_int("checkpoint_interval");
    t.validation_interval = c.get_int("validation_interval");
    t.log_interval = c.get_int("log_interval");
    t.val_fraction = c.get_double("val_fraction");
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return t;
}

PairedDataset dataset_from_config(const Config& c) {
    if (c.is_set("dataset")) {
        const std::filesystem::path path = c.get("dataset");
        if (!std::filesystem::exists(path)) {
            throw ConfigError("key 'dataset': file '" + path.string() + "' does not exist");
        }
        try {
            return load_dataset(path);
        } catch (const std::runtime_error& e) {
            throw ConfigError(std::string("key 'dataset': ") + e.what());
        }
    }
    if (!c.is_set("data_generator")) {
        throw ConfigError("missing required key 'dataset' (or 'data_generator' to generate data)");
    }
    const std::string gen = c.get("data_generator");
    const std::uint64_t seed = c.is_set("data_seed") ? c.get_u64("data_seed") : c.get_u64("seed");
    const auto n = static_cast<Eigen::Index>(c.get_int("data_n"));
    try {
        if (gen == "joint_gaussian") {
            JointGaussianSpec spec;
            spec.mean0 = c.get_double("data_mean0");
            spec.meany = c.get_double("data_meany");
            spec.var0 = c.get_double("data_var0");
            spec.vary = c.get_double("data_vary");
            spec.corr = c.get_double("data_corr");
            return gen_joint_gaussian(spec, static_cast<Eigen::Index>(c.get_int("data_dim")), n, seed);
        }
        if (gen == "two_moons") return gen_two_moons_paired(n, c.get_double("data_noise_sd"), seed);
        if (gen == "binary_patterns") {
            return gen_binary_patterns(n, static_cast<int>(c.get_int("data_side")), c.get_double("data_flip_prob"),
                                       seed);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("data generator: ") + e.what());
    }
    throw ConfigError("key 'data_generator': unknown generator '" + gen + "'");
}

}  // namespace bbdm
