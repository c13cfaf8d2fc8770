#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

namespace dnnlab {

// Parse TOML into a JSON value. Covers the config subset: comments, bare
// keys, [dotted.section] headers, strings, integers, floats, booleans, and
// flat arrays. Throws std::runtime_error with a line number on anything
// else.
nlohmann::json parse_toml(const std::string& text);

// Read a config file as JSON, accepting TOML and JSON interchangeably (the
// first non-space byte decides).
nlohmann::json load_config_file(const std::string& path);

}  // namespace dnnlab
