#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asolv/pipeline.hpp"
#include "common.hpp"

using namespace asolv;
using testutil::near;

namespace {

std::string write_temp(const std::string& body) {
    static int counter = 0;
    std::string path = "/tmp/asolv_test_" + std::to_string(counter++) + ".json";
    std::ofstream(path) << body;
    return path;
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string line;
    while (std::getline(is, line)) out.push_back(line);
    return out;
}

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

} // namespace

TEST_CASE("problem files are validated field by field") {
    CHECK_THROWS_AS(ProblemFile::load("/tmp/no_such_file_asolv.json"), Error);
    CHECK_THROWS_AS(ProblemFile::load(write_temp("{ not json")), Error);

    // X array length != n
    CHECK_THROWS_AS(ProblemFile::load(write_temp(R"({
        "name": "bad", "n": 2, "k": 0, "t0": 1.0,
        "f": ["x2", "0 - x1"], "X": ["a1/t"],
        "A0": [[-2, 2], [-2, 2]], "compact": [[-1, 1], [-1, 1]]
    })")), ValidationError);

    // compact must sit strictly inside A0
    CHECK_THROWS_AS(ProblemFile::load(write_temp(R"({
        "name": "bad", "n": 1, "k": 0, "t0": 1.0,
        "f": ["0"], "X": ["a1/t"],
        "A0": [[-1, 1]], "compact": [[-1, 1]]
    })")), ValidationError);

    // f may not reference parameters
    CHECK_THROWS_AS(ProblemFile::load(write_temp(R"({
        "name": "bad", "n": 1, "k": 0, "t0": 1.0,
        "f": ["a1*x1"], "X": ["a1/t"],
        "A0": [[-2, 2]], "compact": [[-1, 1]]
    })")), ValidationError);

    // X may not reference states
    CHECK_THROWS_AS(ProblemFile::load(write_temp(R"({
        "name": "bad", "n": 1, "k": 0, "t0": 1.0,
        "f": ["0"], "X": ["x1/t"],
        "A0": [[-2, 2]], "compact": [[-1, 1]]
    })")), ValidationError);

    // malformed expression text
    CHECK_THROWS_AS(ProblemFile::load(write_temp(R"({
        "name": "bad", "n": 1, "k": 0, "t0": 1.0,
        "f": ["1 +"], "X": ["a1/t"],
        "A0": [[-2, 2]], "compact": [[-1, 1]]
    })")), Error);
}

TEST_CASE("check passes the quadratic fixture and reports its order") {
    RunResult res = run_check(testutil::fixture("riccati.json"));
    CHECK(res.exit_code == 0);
    auto j = nlohmann::json::parse(res.machine);
    CHECK(j["verdict"] == "pass");
    CHECK(j["conditions"]["verdict"] == true);
    CHECK(near(j["conditions"]["nu"].get<double>(), 3.0, 0.1));
    CHECK(near(j["profile"]["mu"]["value"].get<double>(), 4.0, 0.05));
    CHECK(res.human.find("verdict: pass") != std::string::npos);
}

TEST_CASE("check fails the boundary fixture with exit code 2") {
    RunResult res = run_check(testutil::fixture("failing-boundary.json"));
    CHECK(res.exit_code == 2);
    auto j = nlohmann::json::parse(res.machine);
    CHECK(j["verdict"] == "fail");
    CHECK(j["conditions"]["cond1"] == false);
}

TEST_CASE("solve refuses before solving when conditions fail") {
    RunResult res = run_solve(testutil::fixture("failing-boundary.json"), vec1(1.0));
    CHECK(res.exit_code == 2);
    auto j = nlohmann::json::parse(res.machine);
    CHECK(j.contains("refused"));
    CHECK_FALSE(j.contains("alphas"));
    CHECK(res.csv.empty());
}

TEST_CASE("solve emits the remainder CSV with a settled t^nu |R|") {
    RunResult res = run_solve(testutil::fixture("riccati.json"), vec1(0.5));
    REQUIRE(res.exit_code == 0);

    auto lines = split_lines(res.csv);
    REQUIRE(lines.size() > 10);
    CHECK(lines[0] == "t,X_1,R_1,abs_Y,abs_R,tnu_abs_R");

    // over the top decade t^3 |R| sits within 20% of alpha^2 = 0.25
    double t_hi = 0.0;
    std::vector<std::pair<double, double>> rows; // (t, tnu_abs_R)
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream is(lines[i]);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(is, cell, ',')) vals.push_back(std::stod(cell));
        REQUIRE(vals.size() == 6);
        rows.emplace_back(vals[0], vals[5]);
        t_hi = std::max(t_hi, vals[0]);
    }
    int checked = 0;
    for (const auto& [t, tnuR] : rows) {
        if (t < t_hi / 10.0) continue;
        CHECK(tnuR >= 0.8 * 0.25);
        CHECK(tnuR <= 1.2 * 0.25);
        ++checked;
    }
    CHECK(checked >= 100);
}

TEST_CASE("exact families solve to a zero remainder column") {
    RunResult res = run_solve(testutil::fixture("pendulum-eq.json"), Eigen::VectorXd::Zero(2));
    REQUIRE(res.exit_code == 0);
    auto j = nlohmann::json::parse(res.machine);
    CHECK(j["alphas"][0]["exact"] == true);
    auto lines = split_lines(res.csv);
    CHECK(lines[0] == "t,X_1,X_2,R_1,R_2,abs_Y,abs_R,tnu_abs_R");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream is(lines[i]);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(is, cell, ',')) vals.push_back(std::stod(cell));
        CHECK(vals[3] == 0.0); // R_1
        CHECK(vals[4] == 0.0); // R_2
    }
}

TEST_CASE("alpha is validated against the declared domain") {
    CHECK_THROWS_AS(run_solve(testutil::fixture("riccati.json"), Eigen::VectorXd::Zero(2)),
                    ValidationError);
    CHECK_THROWS_AS(run_solve(testutil::fixture("riccati.json"), vec1(5.0)), ValidationError);
}

TEST_CASE("verify compares against the backward reference") {
    RunResult res = run_verify(testutil::fixture("riccati.json"), vec1(0.5));
    CHECK(res.exit_code == 0);
    auto j = nlohmann::json::parse(res.machine);
    double slope = j["alphas"][0]["verify_slope"].get<double>();
    CHECK(near(slope, -3.0, 0.1));
    double c = j["alphas"][0]["verify_c"].get<double>();
    CHECK(c >= 0.2);
    CHECK(c <= 0.3);
}

TEST_CASE("sweep aggregates the parameter box and is byte-deterministic") {
    RunResult a = run_sweep(testutil::fixture("riccati.json"));
    RunResult b = run_sweep(testutil::fixture("riccati.json"));
    CHECK(a.exit_code == 0);
    CHECK(a.machine == b.machine);
    CHECK(a.human == b.human);

    auto j = nlohmann::json::parse(a.machine);
    CHECK(j["uniformity"]["verdict"] == true);
    CHECK(near(j["uniformity"]["max_c"].get<double>(), 1.0, 0.1));
    CHECK(j["uniformity"]["constant_ratio"].get<double>() <= 10.0);
    CHECK(j["alphas"].size() == 5);
}

TEST_CASE("sweep refuses failing fixtures before any solve") {
    RunResult res = run_sweep(testutil::fixture("failing-boundary.json"));
    CHECK(res.exit_code == 2);
    auto j = nlohmann::json::parse(res.machine);
    CHECK(j.contains("refused"));
}

TEST_CASE("every number in the human report appears in the machine report") {
    RunResult res = run_check(testutil::fixture("riccati.json"));
    // numbers are rendered through one shared formatter; spot-check a few
    auto j = nlohmann::json::parse(res.machine);
    auto appears = [&](const nlohmann::json& v) {
        return res.human.find(v.dump()) != std::string::npos;
    };
    CHECK(appears(j["profile"]["mu"]["value"]));
    CHECK(appears(j["profile"]["nu"]));
    CHECK(appears(j["conditions"]["margin1"]));
    CHECK(appears(j["conditions"]["margin2"]));
}
