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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kWork = fs::path(PFERMION_TEST_DIR) / "cli_work";

struct Result {
    int code;
    std::string err;
};

Result run(const std::string& args) {
    fs::create_directories(kWork);
    const fs::path err = kWork / "stderr.txt";
    const std::string cmd = "cd '" + kWork.string() + "' && '" + PFERMION_CLI + "' " + args + " > /dev/null 2> '" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    std::ifstream f(err);
    std::stringstream ss;
    ss << f.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Data rows of a CSV, skipping the units comment and header.
std::vector<std::vector<double>> rows(const fs::path& p) {
    std::ifstream f(p);
    std::string line;
    std::vector<std::vector<double>> out;
    int n = 0;
    while (std::getline(f, line)) {
        if (n++ < 2) continue;
        std::vector<double> r;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) r.push_back(std::strtod(cell.c_str(), nullptr));
        out.push_back(r);
    }
    return out;
}

std::vector<std::string> header(const fs::path& p) {
    std::ifstream f(p);
    std::string units, h;
    std::getline(f, units);
    std::getline(f, h);
    CHECK(units.rfind("# units:", 0) == 0);
    std::vector<std::string> out;
    std::stringstream ls(h);
    std::string cell;
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

TEST_CASE("config errors exit 2 and name the field") {
    Result r = run("steady --output bad --set /leads/1/width=-1");
    CHECK(r.code == 2);
    CHECK(r.err.find("/leads/1/width") != std::string::npos);

    r = run("evolve --output bad --set /solver/tolerance=1");
    CHECK(r.code == 2);
    CHECK(r.err.find("/solver/tolerance") != std::string::npos);

    std::ofstream(kWork / "broken.json") << "{\n  \"system\": {\"epsilon\": 1,,}\n}\n";
    r = run("steady --output bad -c broken.json");
    CHECK(r.code == 2);
    CHECK(r.err.find("line 2") != std::string::npos);

    r = run("steady --output bad --map nonsense");
    CHECK(r.code == 2);
    CHECK(r.err.find("/construction/map") != std::string::npos);
}

TEST_CASE("pole collision is a configuration error") {
    const Result r = run("decompose --output pole --map exact-two --set /leads/0/width=3.141592653589793 --set /leads/0/beta=1");
    CHECK(r.code == 2);
    CHECK(r.err.find("pole-collision") != std::string::npos);
}

TEST_CASE("identical config gives byte-identical output") {
    const std::string args = "sweep-current --output det --set /solver/sweep/points=4 --set /solver/sweep/oracle=true --threads 3";
    REQUIRE(run(args).code == 0);
    std::vector<std::pair<fs::path, std::string>> first;
    for (const auto& e : fs::directory_iterator(kWork / "det")) first.emplace_back(e.path(), slurp(e.path()));
    REQUIRE(first.size() == 3);
    REQUIRE(run(args).code == 0);
    for (const auto& [p, text] : first) CHECK(slurp(p) == text);
}

TEST_CASE("single-point sweep matches steady state plus current") {
    REQUIRE(run("sweep-current --output one --set /solver/sweep/points=1 --set /solver/sweep/dmu_min=3 "
                "--set /solver/sweep/mu_center=0.5").code == 0);
    REQUIRE(run("steady --output one_steady --set /leads/0/mu=2 --set /leads/1/mu=-1").code == 0);
    const auto r = rows(kWork / "one" / "sweep.csv");
    CHECK(header(kWork / "one" / "sweep.csv") == std::vector<std::string>{"dmu", "I_L", "I_R"});
    REQUIRE(r.size() == 1);
    const json s = json::parse(slurp(kWork / "one_steady" / "steady.json"));
    const double il = s["observables"]["currents"]["L"]["value"], ir = s["observables"]["currents"]["R"]["value"];
    CHECK(r[0][0] == 3.0);
    CHECK(r[0][1] == doctest::Approx(il).epsilon(1e-12));
    CHECK(r[0][2] == doctest::Approx(ir).epsilon(1e-12));
    CHECK(std::abs(il + ir) < 1e-10);
}

TEST_CASE("zero Matsubara terms give a resonant-only decomposition") {
    REQUIRE(run("decompose --output k0 --set /solver/decompose/terms=0 --set /solver/times/points=7").code == 0);
    for (const char* s : {"plus", "minus"}) {
        const fs::path d = kWork / "k0";
        const std::string res = std::string("correlation_L_") + s + "_resonant.csv";
        const std::string dec = std::string("correlation_L_") + s + "_decomposed.csv";
        CHECK(header(d / dec) == std::vector<std::string>{"t", "re", "im"});
        CHECK(slurp(d / dec) == slurp(d / res));
    }
}

TEST_CASE("fit report carries residuals and terms") {
    REQUIRE(run("fit --output fit --set /construction/terms=2").code == 0);
    const json j = json::parse(slurp(kWork / "fit" / "fit_L.json"));
    CHECK(j.contains("residual_l2"));
    CHECK(j.contains("residual_sup"));
    CHECK(j["terms"].size() == 2);
}

TEST_CASE("evolve checkpoint restarts the trajectory") {
    REQUIRE(run("evolve --output ev --map resonant --set /solver/times/stop=2 --set /solver/times/points=5 "
                "--set '/initial/occupations=[1]'").code == 0);
    CHECK(header(kWork / "ev" / "trajectory.csv") == std::vector<std::string>{"t", "n_s", "I_L", "I_R", "trace"});
    const auto a = rows(kWork / "ev" / "trajectory.csv");
    REQUIRE(run("evolve --output ev2 --map resonant --set /solver/times/start=2 --set /solver/times/stop=4 "
                "--set /solver/times/points=5 --set /initial/checkpoint=ev/state.txt").code == 0);
    REQUIRE(run("evolve --output ev3 --map resonant --set /solver/times/stop=4 --set /solver/times/points=9 "
                "--set '/initial/occupations=[1]'").code == 0);
    const auto b = rows(kWork / "ev2" / "trajectory.csv");
    const auto c = rows(kWork / "ev3" / "trajectory.csv");
    CHECK(b.front()[1] == doctest::Approx(a.back()[1]).epsilon(1e-12));
    CHECK(b.back()[1] == doctest::Approx(c.back()[1]).epsilon(1e-6));
    for (const auto& row : c) CHECK(row[4] == doctest::Approx(1.0).epsilon(1e-10));

    const Result r = run("evolve --output ev4 --set /initial/checkpoint=ev/state.txt");
    CHECK(r.code == 2);
}

TEST_CASE("solver failures exit 3; sweeps keep partial rows") {
    CHECK(run("evolve --output fail --set /solver/max_steps=2").code == 3);
    const Result r = run("sweep-current --output sweep_fail --set /solver/sweep/points=2 "
                         "--set /solver/steady/method=iterative --set /solver/steady/max_iterations=1 "
                         "--set /solver/steady/residual_tolerance=1e-300");
    CHECK(r.code == 3);
    CHECK(r.err.find("sweep point 0") != std::string::npos);
    const auto rs = rows(kWork / "sweep_fail" / "sweep.csv");
    REQUIRE(rs.size() == 2);
    CHECK(std::isnan(rs[0][1]));
    const json m = json::parse(slurp(kWork / "sweep_fail" / "manifest.json"));
    CHECK(m["results"]["points"][1].contains("error"));
    CHECK(m["exit_code"] == 3);
}

TEST_CASE("spectrum writes the spectral function and its time-domain inputs") {
    REQUIRE(run("spectrum --output sp --map resonant --set /solver/omega/points=201").code == 0);
    CHECK(header(kWork / "sp" / "spectrum_s.csv") == std::vector<std::string>{"omega", "A"});
    const auto c = rows(kWork / "sp" / "spectrum_s_correlations.csv");
    REQUIRE(!c.empty());
    CHECK(c.front()[1] == doctest::Approx(1.0));
    const json m = json::parse(slurp(kWork / "sp" / "manifest.json"));
    CHECK(m["results"]["spectra"][0]["sum_rule"].get<double>() == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(m["config"]["solver"]["spectrum"]["t_max"] == 40.0);
}
