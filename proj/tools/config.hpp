// Copyright 2025 The pfermion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace pfcli {

using json = nlohmann::ordered_json;

// Configuration problem; location is a JSON pointer or "line L, column C".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string location, const std::string& what)
        : std::runtime_error(what), location_(std::move(location)) {}
    const std::string& location() const { return location_; }

private:
    std::string location_;
};

json default_config();

// Parse a config file; syntax errors carry line and column.
json load_config_file(const std::string& path);

// "/pointer=value"; value is parsed as JSON, falling back to a plain string.
void apply_assignment(json& user, const std::string& assignment);

// Defaults overlaid with the user tree; unknown keys and type mismatches are errors.
json resolve_config(const json& user);

// Typed, range-checked access to the resolved tree.
class Reader {
public:
    explicit Reader(const json& root) : root_(root) {}

    const json& at(const std::string& pointer) const;
    bool has(const std::string& pointer) const;
    double number(const std::string& pointer) const;
    double positive(const std::string& pointer) const;
    double non_negative(const std::string& pointer) const;
    double probability(const std::string& pointer) const;
    long integer(const std::string& pointer, long min, long max) const;
    bool boolean(const std::string& pointer) const;
    std::string string(const std::string& pointer) const;
    std::string choice(const std::string& pointer, const std::vector<std::string>& allowed) const;
    // Number or "inf".
    double inverse_temperature(const std::string& pointer) const;
    std::vector<double> grid(const std::string& pointer, const char* lo, const char* hi, bool geometric = false) const;
    // Square matrix as nested real array or {"re": [[...]], "im": [[...]]}, row-major.
    void matrix(const std::string& pointer, long dim, std::vector<double>& re, std::vector<double>& im) const;

private:
    const json& root_;
};

}  // namespace pfcli
