#ifndef USPS_TOML_HPP
#define USPS_TOML_HPP

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "usps/errors.hpp"

namespace usps::toml {

// Minimal TOML subset: [tables], key = value with strings, integers, floats,
// booleans and single-line arrays; '#' comments. Errors carry line numbers.

struct Value {
    std::variant<int64_t, double, bool, std::string, std::vector<Value>> data;
    int line = 0;

    bool is_int() const { return std::holds_alternative<int64_t>(data); }
    bool is_float() const { return std::holds_alternative<double>(data); }
    bool is_bool() const { return std::holds_alternative<bool>(data); }
    bool is_string() const { return std::holds_alternative<std::string>(data); }
    bool is_array() const { return std::holds_alternative<std::vector<Value>>(data); }

    int64_t as_int() const;
    double as_float() const;  // accepts integer values too
    bool as_bool() const;
    const std::string& as_string() const;
    const std::vector<Value>& as_array() const;
};

using Table = std::map<std::string, Value>;

struct Document {
    Table root;
    std::map<std::string, Table> tables;
    std::vector<std::string> table_order;

    bool has_table(const std::string& name) const { return tables.count(name) > 0; }
};

/// Throws ConfigError with a "line N:" prefix on malformed input.
Document parse(const std::string& text);
Document parse_file(const std::string& path);

}  // namespace usps::toml

#endif
