#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace bbdm {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Strict parse of a full field; throws std::invalid_argument on junk.
double parse_double(std::string_view text);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

/// Numeric table with one header line. Lines starting with '#' are skipped.
struct NumericTable {
    std::vector<std::string> columns;
    Eigen::MatrixXd values;
};

NumericTable read_numeric_csv(const std::filesystem::path& path);
void write_numeric_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
                       const Eigen::MatrixXd& values);

/// "prefix0,prefix1,..." style column names.
std::vector<std::string> indexed_columns(std::string_view prefix, Eigen::Index count);

}  // namespace bbdm
