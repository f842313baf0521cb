#include "csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "valstudy/error.hpp"

namespace valstudy::csv {

bool read_row(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;
    std::string cur;
    bool quoted = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    cur.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (quoted) throw DataError("csv: unterminated quoted field");
    if (!any) return false;
    fields.push_back(std::move(cur));
    return true;
}

std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

Header::Header(std::vector<std::string> names) : names_(std::move(names)) {
    for (auto& n : names_) n = trim(n);
}

std::optional<std::size_t> Header::find(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

std::size_t Header::require(const std::string& name, const std::string& table) const {
    auto idx = find(name);
    if (!idx) throw DataError(table + ": missing required column '" + name + "'");
    return *idx;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_optional_real(const std::string& cell, const std::string& what) {
    std::string t = trim(cell);
    if (t.empty() || t == "NA" || t == "nan" || t == "NaN") return std::nullopt;
    return parse_real(t, what);
}

double parse_real(const std::string& cell, const std::string& what) {
    std::string t = trim(cell);
    double v = 0.0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v))
        throw DataError(what + ": cannot parse '" + cell + "' as a real number");
    return v;
}

long long parse_int(const std::string& cell, const std::string& what) {
    std::string t = trim(cell);
    long long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
        throw DataError(what + ": cannot parse '" + cell + "' as an integer");
    return v;
}

bool parse_bool(const std::string& cell, const std::string& what) {
    std::string t = trim(cell);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "1" || t == "true" || t == "yes") return true;
    if (t == "0" || t == "false" || t == "no") return false;
    throw DataError(what + ": cannot parse '" + cell + "' as a boolean");
}

}  // namespace valstudy::csv
