#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbdm/dataset.hpp"
#include "bbdm/trainer.hpp"

namespace bbdm {

/// Bad configuration: unknown key, unparsable value, missing required key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` settings. Every key must be known; unset optional keys hold "".
class Config {
public:
    Config();

    /// `#` starts a comment; blank lines are ignored.
    void load_file(const std::filesystem::path& path);
    void parse(const std::string& text, const std::string& origin = "<string>");
    /// "key=value".
    void set(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    bool is_set(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    std::string require(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

TrainConfig to_train_config(const Config& config);

/// Loads `dataset` if set, otherwise generates from the `data_*` keys.
/// Throws ConfigError naming the key when neither is usable.
PairedDataset dataset_from_config(const Config& config);

}  // namespace bbdm
