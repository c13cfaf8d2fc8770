#include "dnnlab/config_file.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dnnlab {

using nlohmann::json;

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
    throw std::runtime_error("toml parse error, line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Remove a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

json parse_scalar(const std::string& raw, int line) {
    const std::string v = trim(raw);
    if (v.empty()) fail(line, "missing value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') fail(line, "unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                ++i;
                switch (v[i]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: fail(line, "unsupported escape");
                }
            } else {
                out += v[i];
            }
        }
        return json(out);
    }
    if (v == "true") return json(true);
    if (v == "false") return json(false);

    std::int64_t iv = 0;
    auto ires = std::from_chars(v.data(), v.data() + v.size(), iv);
    if (ires.ec == std::errc{} && ires.ptr == v.data() + v.size()) return json(iv);

    try {
        std::size_t used = 0;
        const double dv = std::stod(v, &used);
        if (used == v.size()) return json(dv);
    } catch (const std::exception&) {
    }
    fail(line, "cannot parse value: " + v);
}

json parse_value(const std::string& raw, int line) {
    const std::string v = trim(raw);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']') fail(line, "arrays must close on the same line");
        json arr = json::array();
        std::string body = v.substr(1, v.size() - 2);
        std::string item;
        bool quoted = false;
        for (char c : body) {
            if (c == '"') quoted = !quoted;
            if (c == ',' && !quoted) {
                if (!trim(item).empty()) arr.push_back(parse_scalar(item, line));
                item.clear();
            } else {
                item += c;
            }
        }
        if (!trim(item).empty()) arr.push_back(parse_scalar(item, line));
        return arr;
    }
    return parse_scalar(v, line);
}

json* descend(json& root, const std::string& dotted, int line) {
    json* node = &root;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        part = trim(part);
        if (part.empty()) fail(line, "empty section path component");
        node = &(*node)[part];
        if (!node->is_object() && !node->is_null()) fail(line, "section clashes with a value");
        if (node->is_null()) *node = json::object();
    }
    return node;
}

}  // namespace

json parse_toml(const std::string& text) {
    json root = json::object();
    json* section = &root;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "unterminated section header");
            const std::string path = trim(line.substr(1, line.size() - 2));
            if (path.empty()) fail(line_no, "empty section header");
            section = descend(root, path, line_no);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) fail(line_no, "empty key");
        if (key.find('.') != std::string::npos) fail(line_no, "dotted keys are not supported");
        (*section)[key] = parse_value(line.substr(eq + 1), line_no);
    }
    return root;
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (c == '{') return json::parse(text);
        break;
    }
    return parse_toml(text);
}

}  // namespace dnnlab
