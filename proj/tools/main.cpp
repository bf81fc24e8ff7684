#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "asolv/pipeline.hpp"

namespace {

Eigen::VectorXd parse_alpha(const std::string& spec) {
    std::vector<double> vals;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            double v = std::stod(item, &pos);
            if (pos != item.size()) throw std::invalid_argument(item);
            vals.push_back(v);
        } catch (const std::exception&) {
            throw asolv::ValidationError("--alpha: cannot parse '" + item + "' as a number");
        }
    }
    if (vals.empty()) throw asolv::ValidationError("--alpha: empty list");
    Eigen::VectorXd a(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) a[static_cast<Eigen::Index>(i)] = vals[i];
    return a;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw asolv::Error("cannot write " + p.string());
    out << content;
}

void emit(const asolv::RunResult& res, const std::string& out_dir) {
    std::cout << res.human;
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir);
    std::filesystem::path dir(out_dir);
    write_file(dir / "report.json", res.machine);
    write_file(dir / "report.txt", res.human);
    if (!res.csv.empty()) write_file(dir / "solution.csv", res.csv);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Existence checks and numerical construction of asymptotic "
                 "solution families for dx/dt = t^k f(x, t)"};
    app.require_subcommand(1);

    std::string path, alpha_spec, out_dir;
    asolv::RunOptions opt;
    double tmax_factor = 0.0;
    int ppd = 0;

    auto add_common = [&](CLI::App* cmd, bool with_alpha) {
        cmd->add_option("problem", path, "problem file (JSON)")->required();
        if (with_alpha) cmd->add_option("--alpha", alpha_spec, "parameter value, comma-separated");
        cmd->add_option("--out", out_dir, "output directory for report.json / report.txt");
        cmd->add_option("--seed", opt.seed, "RNG seed for constant estimation");
        cmd->add_option("--tmax-factor", tmax_factor, "truncation horizon T_max / T");
        cmd->add_option("--points-per-decade", ppd, "grid density for the solver");
    };

    CLI::App* check = app.add_subcommand("check", "fit the exponent profile, test the conditions");
    add_common(check, false);
    CLI::App* solve = app.add_subcommand("solve", "construct the solution at one alpha");
    add_common(solve, true);
    CLI::App* verify = app.add_subcommand("verify", "solve, then compare against a reference "
                                                    "integration");
    add_common(verify, true);
    CLI::App* sweep = app.add_subcommand("sweep", "full pipeline over the parameter compact");
    add_common(sweep, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (tmax_factor > 0.0) opt.tmax_factor = tmax_factor;
        if (ppd > 0) opt.points_per_decade = ppd;
        std::optional<Eigen::VectorXd> alpha;
        if (!alpha_spec.empty()) alpha = parse_alpha(alpha_spec);

        asolv::RunResult res;
        if (check->parsed()) {
            res = asolv::run_check(path, opt);
        } else if (solve->parsed()) {
            if (!alpha) throw asolv::ValidationError("solve requires --alpha");
            res = asolv::run_solve(path, *alpha, opt);
        } else if (verify->parsed()) {
            res = asolv::run_verify(path, alpha, opt);
        } else {
            res = asolv::run_sweep(path, opt);
        }
        emit(res, out_dir);
        return res.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
