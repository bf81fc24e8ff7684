#include "asolv/problem.hpp"

#include <fstream>

#include <json.hpp>

namespace asolv {

namespace {

using nlohmann::json;

double require_number(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_number())
        throw ValidationError(std::string("problem file: missing or non-numeric field '") + field +
                              "'");
    return j[field].get<double>();
}

std::vector<std::string> require_string_array(const json& j, const char* field, int n) {
    if (!j.contains(field) || !j[field].is_array())
        throw ValidationError(std::string("problem file: field '") + field +
                              "' must be an array of expression strings");
    std::vector<std::string> out;
    for (const auto& e : j[field]) {
        if (!e.is_string())
            throw ValidationError(std::string("problem file: field '") + field +
                                  "' must contain only strings");
        out.push_back(e.get<std::string>());
    }
    if (static_cast<int>(out.size()) != n)
        throw ValidationError(std::string("problem file: field '") + field + "' has " +
                              std::to_string(out.size()) + " entries, expected n = " +
                              std::to_string(n));
    return out;
}

Box require_box(const json& j, const char* field, int n) {
    if (!j.contains(field) || !j[field].is_array())
        throw ValidationError(std::string("problem file: field '") + field +
                              "' must be an array of [lo, hi] pairs");
    Box box;
    for (const auto& e : j[field]) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw ValidationError(std::string("problem file: field '") + field +
                                  "' entries must be numeric [lo, hi] pairs");
        double lo = e[0].get<double>(), hi = e[1].get<double>();
        if (!(lo < hi))
            throw ValidationError(std::string("problem file: field '") + field +
                                  "' has an empty interval [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "]");
        box.axes.push_back({lo, hi});
    }
    if (box.dim() != n)
        throw ValidationError(std::string("problem file: field '") + field + "' has " +
                              std::to_string(box.dim()) + " axes, expected n = " +
                              std::to_string(n));
    return box;
}

} // namespace

ProblemFile ProblemFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open problem file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("problem file is not valid JSON: " + std::string(e.what()));
    }

    ProblemFile p;
    p.name = j.value("name", std::string("unnamed"));
    double nd = require_number(j, "n");
    p.n = static_cast<int>(nd);
    if (p.n < 1 || nd != p.n)
        throw ValidationError("problem file: n must be a positive integer");
    p.k = require_number(j, "k");
    p.t0 = require_number(j, "t0");
    p.f_src = require_string_array(j, "f", p.n);
    p.X_src = require_string_array(j, "X", p.n);
    p.A0 = require_box(j, "A0", p.n);
    p.compact = require_box(j, "compact", p.n);
    if (j.contains("phase_scale")) p.phase_scale = require_number(j, "phase_scale");

    if (j.contains("overrides")) {
        const json& o = j["overrides"];
        if (!o.is_object()) throw ValidationError("problem file: 'overrides' must be an object");
        auto& ov = p.overrides;
        if (o.contains("fit_window")) {
            const json& w = o["fit_window"];
            if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number())
                throw ValidationError("problem file: overrides.fit_window must be [t_lo, t_hi]");
            ov.fit_window = FitWindow{w[0].get<double>(), w[1].get<double>()};
        }
        if (o.contains("fit_points")) ov.fit_points = static_cast<int>(require_number(o, "fit_points"));
        if (o.contains("points_per_decade"))
            ov.points_per_decade = static_cast<int>(require_number(o, "points_per_decade"));
        if (o.contains("tmax_factor")) ov.tmax_factor = require_number(o, "tmax_factor");
        if (o.contains("rtol")) ov.rtol = require_number(o, "rtol");
        if (o.contains("atol")) ov.atol = require_number(o, "atol");
        if (o.contains("picard_tol")) ov.picard_tol = require_number(o, "picard_tol");
        if (o.contains("max_iters")) ov.max_iters = static_cast<int>(require_number(o, "max_iters"));
        if (o.contains("envelope")) {
            if (!o["envelope"].is_boolean())
                throw ValidationError("problem file: overrides.envelope must be a boolean");
            ov.envelope = o["envelope"].get<bool>();
        }
    }

    // Full structural validation: expressions parse, variables in range,
    // the compact sits strictly inside A0.
    p.system().validate();
    p.family().validate(p.n);
    return p;
}

SystemDef ProblemFile::system() const {
    SystemDef sys;
    sys.n = n;
    sys.k = k;
    sys.t0 = t0;
    for (int i = 0; i < n; ++i) {
        Expr e = parse(f_src[static_cast<std::size_t>(i)], n);
        if (max_param_index(e) > 0)
            throw ValidationError("f[" + std::to_string(i + 1) +
                                  "] references a parameter; f must depend on x and t only");
        sys.f.push_back(std::move(e));
    }
    return sys;
}

AsymptoticFamily ProblemFile::family() const {
    AsymptoticFamily fam;
    for (int i = 0; i < n; ++i) {
        Expr e = parse(X_src[static_cast<std::size_t>(i)], n);
        if (max_state_index(e) > 0)
            throw ValidationError("X[" + std::to_string(i + 1) +
                                  "] references a state variable; X must depend on alpha and t "
                                  "only");
        fam.X.push_back(std::move(e));
    }
    fam.A0 = A0;
    fam.compact = compact;
    return fam;
}

} // namespace asolv
