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

#include "config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace pfcli {

namespace {

json lead_template() {
    return json{{"name", "L"}, {"spin", nullptr}, {"coupling", 1.0}, {"width", 2.5}, {"mu", 0.0}, {"beta", 5.0}};
}

std::string type_name(const json& v) {
    if (v.is_null()) return "null";
    if (v.is_boolean()) return "boolean";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    return "object";
}

bool same_kind(const json& a, const json& b) {
    return (a.is_number() && b.is_number()) || type_name(a) == type_name(b);
}

std::string child(const std::string& ptr, const std::string& key) {
    std::string k;
    for (char c : key) {
        if (c == '~') k += "~0";
        else if (c == '/') k += "~1";
        else k += c;
    }
    return ptr + "/" + k;
}

// Keys whose default is null accept any value; validated at use.
void merge(json& base, const json& user, const std::string& ptr) {
    if (!user.is_object()) throw ConfigError(ptr.empty() ? "/" : ptr, "expected an object, got " + type_name(user));
    for (const auto& [key, value] : user.items()) {
        const std::string p = child(ptr, key);
        if (!base.contains(key)) throw ConfigError(p, "unknown key '" + key + "'");
        json& slot = base[key];
        if (p == "/leads") {
            if (!value.is_array() || value.empty()) throw ConfigError(p, "expected a non-empty array of leads");
            json leads = json::array();
            for (std::size_t i = 0; i < value.size(); ++i) {
                json l = lead_template();
                l["name"] = i == 0 ? "L" : (i == 1 ? "R" : "lead" + std::to_string(i));
                merge(l, value[i], p + "/" + std::to_string(i));
                leads.push_back(l);
            }
            slot = leads;
        } else if (slot.is_null()) {
            slot = value;
        } else if (slot.is_object() && !slot.empty()) {
            merge(slot, value, p);
        } else if (key == "beta" && value.is_string()) {
            slot = value;
        } else {
            if (!same_kind(slot, value)) {
                throw ConfigError(p, "expected " + type_name(slot) + ", got " + type_name(value));
            }
            slot = value;
        }
    }
}

std::string where(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

json default_config() {
    json c;
    c["units"] = {{"energy", "Gamma"}, {"time", "1/Gamma"}};
    c["system"] = {{"variant", "single-level"},
                   {"epsilon", 1.0},
                   {"interaction", 0.0},
                   {"modes", nullptr},
                   {"hamiltonian", nullptr},
                   {"couplings", nullptr}};
    json l = lead_template(), r = lead_template();
    r["name"] = "R";
    c["leads"] = json::array({l, r});
    c["construction"] = {{"map", "fitted-two"},
                         {"terms", 1},
                         {"delta", 1e6},
                         {"delta_imag", 0.0},
                         {"delta_min", 100.0},
                         {"merge_identical_leads", false},
                         {"mode_cap", 20},
                         {"fit",
                          {{"restarts", 8},
                           {"seed", 0},
                           {"reference_terms", 0},
                           {"max_iterations", 400},
                           {"tolerance", 1e-14},
                           {"grid", nullptr}}}};
    c["solver"] = {{"integrator", "dopri5"},
                   {"rtol", 1e-8},
                   {"atol", 1e-10},
                   {"min_step", 1e-12},
                   {"max_steps", 50000000},
                   {"krylov_dimension", 30},
                   {"steady",
                    {{"method", "auto"},
                     {"residual_tolerance", 1e-9},
                     {"gap_tolerance", 1e-8},
                     {"propagation_time", 200.0},
                     {"max_iterations", 5000},
                     {"direct_limit", 2048}}},
                   {"times", {{"start", 0.0}, {"stop", 10.0}, {"points", 101}}},
                   {"omega", {{"min", -10.0}, {"max", 10.0}, {"points", 801}}},
                   {"spectrum",
                    {{"t_max", 40.0},
                     {"dt", 0.02},
                     {"eta", 1e-3},
                     {"decay_threshold", 1e-2},
                     {"check_reality", true},
                     {"peak_prominence", 1e-3},
                     {"labels", nullptr}}},
                   {"sweep",
                    {{"dmu_min", -10.0}, {"dmu_max", 10.0}, {"points", 21}, {"mu_center", 0.0}, {"threads", 0}, {"oracle", false}}},
                   {"validate", {{"tolerance", 1e-5}, {"t_max", 10.0}, {"points", 201}}},
                   {"decompose", {{"terms", nullptr}}}};
    c["initial"] = {{"occupations", nullptr}, {"density", nullptr}, {"checkpoint", nullptr}};
    c["output"] = {{"directory", "."}, {"prefix", ""}, {"checkpoint", true}};
    return c;
}

json load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(path, "cannot open config file");
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    try {
        return json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + where(text, e.byte), "syntax error: " + std::string(e.what()));
    }
}

void apply_assignment(json& user, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || assignment.empty() || assignment[0] != '/') {
        throw ConfigError(assignment, "--set expects /json/pointer=value");
    }
    const std::string ptr = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    try {
        json::json_pointer p(ptr);
        // array elements of leads are created on demand
        user[p] = value;
    } catch (const json::exception& e) {
        throw ConfigError(ptr, std::string("cannot assign: ") + e.what());
    }
}

json resolve_config(const json& user) {
    json base = default_config();
    if (user.is_null()) return base;
    merge(base, user, "");
    return base;
}

const json& Reader::at(const std::string& pointer) const {
    try {
        return root_.at(json::json_pointer(pointer));
    } catch (const json::exception&) {
        throw ConfigError(pointer, "missing value");
    }
}

bool Reader::has(const std::string& pointer) const {
    const json::json_pointer p(pointer);
    return root_.contains(p) && !root_.at(p).is_null();
}

double Reader::number(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_number()) throw ConfigError(pointer, "expected a number, got " + type_name(v));
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(pointer, "must be finite");
    return x;
}

double Reader::positive(const std::string& pointer) const {
    const double x = number(pointer);
    if (!(x > 0.0)) throw ConfigError(pointer, "must be positive (got " + at(pointer).dump() + ")");
    return x;
}

double Reader::non_negative(const std::string& pointer) const {
    const double x = number(pointer);
    if (!(x >= 0.0)) throw ConfigError(pointer, "must be non-negative (got " + at(pointer).dump() + ")");
    return x;
}

double Reader::probability(const std::string& pointer) const {
    const double x = number(pointer);
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError(pointer, "must lie in [0, 1] (got " + at(pointer).dump() + ")");
    return x;
}

long Reader::integer(const std::string& pointer, long min, long max) const {
    const json& v = at(pointer);
    if (!v.is_number()) throw ConfigError(pointer, "expected an integer, got " + type_name(v));
    const double x = v.get<double>();
    if (x != std::floor(x) || x < double(min) || x > double(max)) {
        throw ConfigError(pointer, "expected an integer in [" + std::to_string(min) + ", " + std::to_string(max) +
                                       "] (got " + v.dump() + ")");
    }
    return long(x);
}

bool Reader::boolean(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_boolean()) throw ConfigError(pointer, "expected true or false, got " + type_name(v));
    return v.get<bool>();
}

std::string Reader::string(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_string()) throw ConfigError(pointer, "expected a string, got " + type_name(v));
    return v.get<std::string>();
}

std::string Reader::choice(const std::string& pointer, const std::vector<std::string>& allowed) const {
    const std::string s = string(pointer);
    for (const auto& a : allowed) {
        if (s == a) return s;
    }
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError(pointer, "'" + s + "' is not one of: " + list);
}

double Reader::inverse_temperature(const std::string& pointer) const {
    const json& v = at(pointer);
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
        throw ConfigError(pointer, "expected a positive number or \"inf\"");
    }
    return positive(pointer);
}

std::vector<double> Reader::grid(const std::string& pointer, const char* lo, const char* hi, bool geometric) const {
    const double a = number(pointer + "/" + lo), b = number(pointer + "/" + hi);
    const long n = integer(pointer + "/points", 2, 100000000);
    if (!(b > a)) throw ConfigError(pointer + "/" + hi, std::string("must exceed ") + lo);
    if (geometric && !(a > 0.0)) throw ConfigError(pointer + "/" + lo, "geometric grid needs a positive start");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const double u = double(i) / double(n - 1);
        g[std::size_t(i)] = geometric ? a * std::pow(b / a, u) : a + (b - a) * u;
    }
    g.back() = b;
    return g;
}

void Reader::matrix(const std::string& pointer, long dim, std::vector<double>& re, std::vector<double>& im) const {
    const json& v = at(pointer);
    const bool split = v.is_object();
    if (split && !v.contains("re")) throw ConfigError(pointer, "complex matrix needs an \"re\" part");
    re.assign(std::size_t(dim * dim), 0.0);
    im.assign(std::size_t(dim * dim), 0.0);
    auto read = [&](const json& m, const std::string& p, std::vector<double>& out) {
        if (!m.is_array() || long(m.size()) != dim) throw ConfigError(p, "expected " + std::to_string(dim) + " rows");
        for (long i = 0; i < dim; ++i) {
            const json& row = m[std::size_t(i)];
            const std::string rp = p + "/" + std::to_string(i);
            if (!row.is_array() || long(row.size()) != dim) throw ConfigError(rp, "expected " + std::to_string(dim) + " columns");
            for (long j = 0; j < dim; ++j) {
                if (!row[std::size_t(j)].is_number()) throw ConfigError(rp + "/" + std::to_string(j), "expected a number");
                out[std::size_t(i * dim + j)] = row[std::size_t(j)].get<double>();
            }
        }
    };
    if (split) {
        read(v.at("re"), pointer + "/re", re);
        if (v.contains("im")) read(v.at("im"), pointer + "/im", im);
        for (const auto& [k, _] : v.items()) {
            if (k != "re" && k != "im") throw ConfigError(child(pointer, k), "unknown key '" + k + "'");
        }
    } else {
        read(v, pointer, re);
    }
}

}  // namespace pfcli
