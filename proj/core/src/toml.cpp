#include "usps/toml.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

#include "usps/util.hpp"

namespace usps::toml {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
    throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

struct Cursor {
    const std::string& s;
    size_t pos = 0;
    int line;

    bool done() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }
    void skip_ws() {
        while (!done() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
};

std::string parse_basic_string(Cursor& c) {
    // opening quote already consumed
    std::string out;
    while (true) {
        if (c.done()) fail(c.line, "unterminated string");
        const char ch = c.s[c.pos++];
        if (ch == '"') return out;
        if (ch == '\\') {
            if (c.done()) fail(c.line, "unterminated escape");
            const char esc = c.s[c.pos++];
            switch (esc) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                default: fail(c.line, std::string("unsupported escape '\\") + esc + "'");
            }
        } else {
            out.push_back(ch);
        }
    }
}

Value parse_value(Cursor& c);

Value parse_array(Cursor& c) {
    // '[' already consumed
    std::vector<Value> items;
    c.skip_ws();
    if (!c.done() && c.peek() == ']') {
        ++c.pos;
        return {items, c.line};
    }
    while (true) {
        c.skip_ws();
        items.push_back(parse_value(c));
        c.skip_ws();
        if (c.done()) fail(c.line, "unterminated array");
        const char ch = c.s[c.pos++];
        if (ch == ']') break;
        if (ch != ',') fail(c.line, "expected ',' or ']' in array");
        c.skip_ws();
        if (!c.done() && c.peek() == ']') {  // trailing comma
            ++c.pos;
            break;
        }
    }
    return {items, c.line};
}

Value parse_value(Cursor& c) {
    c.skip_ws();
    if (c.done()) fail(c.line, "missing value");
    const char ch = c.peek();
    if (ch == '"') {
        ++c.pos;
        return {parse_basic_string(c), c.line};
    }
    if (ch == '[') {
        ++c.pos;
        return parse_array(c);
    }
    // bare token: bool, int or float
    size_t start = c.pos;
    while (!c.done() && c.peek() != ',' && c.peek() != ']' && c.peek() != '#' && c.peek() != ' ' &&
           c.peek() != '\t')
        ++c.pos;
    std::string tok = c.s.substr(start, c.pos - start);
    if (tok.empty()) fail(c.line, "missing value");
    if (tok == "true") return {true, c.line};
    if (tok == "false") return {false, c.line};

    // underscores are TOML digit separators
    std::string clean;
    for (char t : tok)
        if (t != '_') clean.push_back(t);
    const bool looks_float = clean.find_first_of(".eE") != std::string::npos &&
                             clean.find_first_of("0123456789") != std::string::npos;
    if (!looks_float) {
        int64_t iv = 0;
        const auto [p, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), iv);
        if (ec == std::errc() && p == clean.data() + clean.size()) return {iv, c.line};
    }
    char* end = nullptr;
    const double dv = std::strtod(clean.c_str(), &end);
    if (end == clean.c_str() + clean.size() && !clean.empty()) return {dv, c.line};
    fail(c.line, "cannot parse value '" + tok + "'");
}

bool valid_key_char(char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
}

}  // namespace

int64_t Value::as_int() const {
    if (!is_int()) throw ConfigError("line " + std::to_string(line) + ": expected an integer");
    return std::get<int64_t>(data);
}

double Value::as_float() const {
    if (is_int()) return static_cast<double>(std::get<int64_t>(data));
    if (!is_float()) throw ConfigError("line " + std::to_string(line) + ": expected a number");
    return std::get<double>(data);
}

bool Value::as_bool() const {
    if (!is_bool()) throw ConfigError("line " + std::to_string(line) + ": expected a boolean");
    return std::get<bool>(data);
}

const std::string& Value::as_string() const {
    if (!is_string()) throw ConfigError("line " + std::to_string(line) + ": expected a string");
    return std::get<std::string>(data);
}

const std::vector<Value>& Value::as_array() const {
    if (!is_array()) throw ConfigError("line " + std::to_string(line) + ": expected an array");
    return std::get<std::vector<Value>>(data);
}

Document parse(const std::string& text) {
    Document doc;
    Table* current = &doc.root;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        if (pos == text.size() && line_no > 0) break;
        const size_t eol = text.find('\n', pos);
        std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = eol == std::string::npos ? text.size() : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();

        Cursor c{line, 0, line_no};
        c.skip_ws();
        if (c.done() || c.peek() == '#') {
            if (eol == std::string::npos) break;
            continue;
        }

        if (c.peek() == '[') {
            ++c.pos;
            const size_t close = line.find(']', c.pos);
            if (close == std::string::npos) fail(line_no, "unterminated table header");
            std::string name = line.substr(c.pos, close - c.pos);
            if (name.empty()) fail(line_no, "empty table name");
            for (char ch : name)
                if (!valid_key_char(ch)) fail(line_no, "invalid table name '" + name + "'");
            c.pos = close + 1;
            c.skip_ws();
            if (!c.done() && c.peek() != '#') fail(line_no, "unexpected text after table header");
            if (doc.tables.count(name)) fail(line_no, "duplicate table [" + name + "]");
            doc.table_order.push_back(name);
            current = &doc.tables[name];
        } else {
            const size_t key_start = c.pos;
            while (!c.done() && valid_key_char(c.peek())) ++c.pos;
            std::string key = line.substr(key_start, c.pos - key_start);
            if (key.empty()) fail(line_no, "expected a key");
            c.skip_ws();
            if (c.done() || c.peek() != '=') fail(line_no, "expected '=' after key '" + key + "'");
            ++c.pos;
            Value v = parse_value(c);
            v.line = line_no;
            c.skip_ws();
            if (!c.done() && c.peek() != '#')
                fail(line_no, "unexpected text after value for '" + key + "'");
            if (current->count(key)) fail(line_no, "duplicate key '" + key + "'");
            current->emplace(std::move(key), std::move(v));
        }
        if (eol == std::string::npos) break;
    }
    return doc;
}

Document parse_file(const std::string& path) { return parse(read_text_file(path)); }

}  // namespace usps::toml
