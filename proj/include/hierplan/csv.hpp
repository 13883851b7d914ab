#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hierplan/common.hpp"

namespace hierplan::csv {

/// Minimal comma-separated table: first row is the header, no quoting.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws ParseError naming the file when missing.
    std::size_t column(const std::string& name) const;
    std::string source;
};

Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& source);

long long to_int(const std::string& field, const std::string& context);
double to_double(const std::string& field, const std::string& context);

/// Fixed-point with `precision` decimals; "nan"/"inf" for non-finite values.
std::string format_double(double v, int precision = 6);

std::ofstream open_for_write(const std::filesystem::path& path);

} // namespace hierplan::csv
