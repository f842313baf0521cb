#pragma once

// Minimal RFC 4180 reader/writer used by the panel, spell and limit tables.

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace valstudy::csv {

/// Reads one record; returns false at end of input. Handles quoted fields
/// with embedded commas, quotes and newlines.
bool read_row(std::istream& in, std::vector<std::string>& fields);

std::string escape(const std::string& field);

/// Header lookup helper: column index by name, or nullopt.
class Header {
public:
    explicit Header(std::vector<std::string> names);
    std::optional<std::size_t> find(const std::string& name) const;
    std::size_t require(const std::string& name, const std::string& table) const;
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
};

std::string trim(const std::string& s);
std::optional<double> parse_optional_real(const std::string& cell, const std::string& what);
double parse_real(const std::string& cell, const std::string& what);
long long parse_int(const std::string& cell, const std::string& what);
bool parse_bool(const std::string& cell, const std::string& what);

}  // namespace valstudy::csv
