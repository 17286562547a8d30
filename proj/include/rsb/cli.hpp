#ifndef RSB_CLI_HPP
#define RSB_CLI_HPP

// rs_backlund front end: verify | backlund | evolve.
// Exit codes: 0 ok, 1 identity/residual failure, 2 config error, 3 no convergence.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "identity_suite.hpp"

namespace rsb::cli
{

using nlohmann::json;

enum exit_code : int { ok = 0, identity_failed = 1, config_invalid = 2, not_converged = 3 };

class config_error : public std::runtime_error
{
public:
    config_error(const std::string& field, const std::string& what)
        : std::runtime_error("config error in field '" + field + "': " + what), field_(field)
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class output_format { json, csv };

struct RunConfig {
    int n = 0;
    cplx tau{0.0, 1.0};
    cplx eta{0.23, 0.0};
    std::vector<cplx> lambda0;
    std::vector<cplx> t0;
    std::vector<cplx> mu0;
    std::vector<cplx> c_schedule{cplx{}};
    cplx u{};
    cplx v{};
    cplx z_probe{0.31, 0.17};
    int steps = 10;
    std::uint64_t seed = 42;
    std::optional<double> tol;
    std::string output_path;
    output_format format = output_format::json;
    SolverConfig solver;
    SuiteConfig suite;
    double residual_gate = 1e-8;

    // c(a); the last schedule entry repeats.
    cplx c_at(int a) const
    {
        return c_schedule[static_cast<std::size_t>(std::min<int>(a, static_cast<int>(c_schedule.size()) - 1))];
    }
};

namespace detail
{

inline cplx parse_complex(const json& j, const std::string& field)
{
    if (j.is_number()) {
        return {j.get<double>(), 0.0};
    }
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        return {j[0].get<double>(), j[1].get<double>()};
    }
    throw config_error(field, "expected a number or a [re, im] pair");
}

inline std::vector<cplx> parse_complex_list(const json& j, const std::string& field)
{
    if (!j.is_array()) {
        throw config_error(field, "expected an array of [re, im] pairs");
    }
    std::vector<cplx> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(parse_complex(j[i], field + "[" + std::to_string(i) + "]"));
    }
    return out;
}

template <class T>
T get_as(const json& j, const std::string& field)
{
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw config_error(field, "wrong type");
    }
}

inline json cj(cplx z)
{
    return json::array({z.real(), z.imag()});
}

inline json cj(std::span<const cplx> v)
{
    auto out = json::array();
    for (auto z : v) {
        out.push_back(cj(z));
    }
    return out;
}

inline std::string fmt17(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace detail

inline RunConfig parse_config(const json& j)
{
    using namespace detail;
    if (!j.is_object()) {
        throw config_error("<root>", "config must be a JSON object");
    }
    static const std::vector<std::string> known{"n", "tau", "eta", "lambda0", "t0", "mu0", "c", "c_schedule", "u", "v",
                                                "z_probe", "steps", "seed", "tol", "output_path", "format", "solver",
                                                "suite", "residual_gate"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw config_error(key, "unknown field");
        }
    }
    RunConfig c;
    if (j.contains("n")) {
        c.n = get_as<int>(j["n"], "n");
        if (c.n < 1) {
            throw config_error("n", "must be >= 1");
        }
    }
    if (j.contains("tau")) {
        c.tau = parse_complex(j["tau"], "tau");
    }
    if (!(c.tau.imag() > 0.0)) {
        throw config_error("tau", "Im(tau) must be > 0");
    }
    if (j.contains("eta")) {
        c.eta = parse_complex(j["eta"], "eta");
    }
    if (j.contains("lambda0")) {
        c.lambda0 = parse_complex_list(j["lambda0"], "lambda0");
    }
    if (j.contains("t0")) {
        c.t0 = parse_complex_list(j["t0"], "t0");
    }
    if (j.contains("mu0")) {
        c.mu0 = parse_complex_list(j["mu0"], "mu0");
    }
    if (j.contains("c") && j.contains("c_schedule")) {
        throw config_error("c_schedule", "give either c or c_schedule, not both");
    }
    if (j.contains("c")) {
        c.c_schedule = {parse_complex(j["c"], "c")};
    }
    if (j.contains("c_schedule")) {
        c.c_schedule = parse_complex_list(j["c_schedule"], "c_schedule");
        if (c.c_schedule.empty()) {
            throw config_error("c_schedule", "must not be empty");
        }
    }
    if (j.contains("u")) {
        c.u = parse_complex(j["u"], "u");
    }
    if (j.contains("v")) {
        c.v = parse_complex(j["v"], "v");
    }
    if (j.contains("z_probe")) {
        c.z_probe = parse_complex(j["z_probe"], "z_probe");
    }
    if (j.contains("steps")) {
        c.steps = get_as<int>(j["steps"], "steps");
    }
    if (j.contains("seed")) {
        c.seed = get_as<std::uint64_t>(j["seed"], "seed");
    }
    if (j.contains("tol")) {
        c.tol = get_as<double>(j["tol"], "tol");
    }
    if (j.contains("output_path")) {
        c.output_path = get_as<std::string>(j["output_path"], "output_path");
    }
    if (j.contains("format")) {
        const auto f = get_as<std::string>(j["format"], "format");
        if (f == "json") {
            c.format = output_format::json;
        } else if (f == "csv") {
            c.format = output_format::csv;
        } else {
            throw config_error("format", "expected \"json\" or \"csv\"");
        }
    }
    if (j.contains("residual_gate")) {
        c.residual_gate = get_as<double>(j["residual_gate"], "residual_gate");
    }
    if (j.contains("solver")) {
        const auto& s = j["solver"];
        if (!s.is_object()) {
            throw config_error("solver", "expected an object");
        }
        for (const auto& [key, val] : s.items()) {
            const std::string f = "solver." + key;
            if (key == "tol") {
                c.solver.tol = get_as<double>(val, f);
            } else if (key == "max_iter") {
                c.solver.max_iter = get_as<int>(val, f);
            } else if (key == "damping") {
                c.solver.damping = get_as<double>(val, f);
            } else if (key == "multistart") {
                c.solver.multistart = get_as<int>(val, f);
            } else if (key == "fd_jacobian") {
                c.solver.fd_jacobian = get_as<bool>(val, f);
            } else {
                throw config_error(f, "unknown field");
            }
        }
    }
    if (j.contains("suite")) {
        const auto& s = j["suite"];
        if (!s.is_object()) {
            throw config_error("suite", "expected an object");
        }
        for (const auto& [key, val] : s.items()) {
            const std::string f = "suite." + key;
            if (key == "draws") {
                c.suite.draws = get_as<int>(val, f);
                if (c.suite.draws < 1) {
                    throw config_error(f, "must be >= 1");
                }
            } else if (key == "ns") {
                c.suite.ns = get_as<std::vector<int>>(val, f);
                for (int n : c.suite.ns) {
                    if (n < 1) {
                        throw config_error(f, "ranks must be >= 1");
                    }
                }
            } else if (key == "taus") {
                c.suite.taus = parse_complex_list(val, f);
                for (auto t : c.suite.taus) {
                    if (!(t.imag() > 0.0)) {
                        throw config_error(f, "Im(tau) must be > 0");
                    }
                }
            } else if (key == "etas") {
                c.suite.etas = parse_complex_list(val, f);
            } else if (key == "threads") {
                c.suite.threads = get_as<int>(val, f);
            } else {
                throw config_error(f, "unknown field");
            }
        }
    }
    return c;
}

// Applies solver/suite seeds and tolerances and validates the model pieces.
inline void finalize(RunConfig& c, bool needs_model)
{
    c.solver.seed = c.seed;
    c.suite.seed = c.seed;
    if (c.steps < 0) {
        throw config_error("steps", "must be >= 0");
    }
    if (c.tol && !(*c.tol > 0.0)) {
        throw config_error("tol", "must be > 0");
    }
    try {
        c.solver.validate();
    } catch (const std::invalid_argument& e) {
        throw config_error("solver", e.what());
    }
    if (!needs_model) {
        return;
    }
    if (c.n == 0) {
        c.n = static_cast<int>(c.lambda0.size());
    }
    if (c.n < 1) {
        throw config_error("n", "missing");
    }
    if (static_cast<int>(c.lambda0.size()) != c.n) {
        throw config_error("lambda0", "must have n entries");
    }
    if (c.t0.empty() == c.mu0.empty()) {
        throw config_error("t0", "give exactly one of t0 or mu0");
    }
    if (!c.t0.empty() && static_cast<int>(c.t0.size()) != c.n) {
        throw config_error("t0", "must have n entries");
    }
    if (!c.mu0.empty() && static_cast<int>(c.mu0.size()) != c.n) {
        throw config_error("mu0", "must have n entries");
    }
}

inline ModelParams model_of(const RunConfig& c)
{
    try {
        return {c.n, c.eta, TorusParams(c.tau)};
    } catch (const std::exception& e) {
        throw config_error("eta", e.what());
    }
}

inline PhaseConfig phase_of(const RunConfig& c, const ModelParams& p)
{
    std::optional<WeightVector> lam;
    try {
        lam.emplace(c.lambda0, p);
    } catch (const std::exception& e) {
        throw config_error("lambda0", e.what());
    }
    std::vector<cplx> t = c.t0;
    if (t.empty()) {
        try {
            t = backlund_t(*lam, WeightVector(c.mu0, p), c.c_at(0));
        } catch (const std::exception& e) {
            throw config_error("mu0", e.what());
        }
    }
    try {
        return {*lam, std::move(t)};
    } catch (const std::exception& e) {
        throw config_error("t0", e.what());
    }
}

inline json report_json(const IdentityReport& r)
{
    json j{{"identity_name", r.name},
           {"draws", r.draws},
           {"max_residual", std::isfinite(r.max_residual) ? json(r.max_residual) : json("inf")},
           {"worst_params", json::parse(r.worst_params)},
           {"seed", r.seed},
           {"tol", r.tol},
           {"passed", r.passed}};
    if (!r.note.empty()) {
        j["note"] = r.note;
    }
    return j;
}

inline int cmd_verify(RunConfig c, std::ostream& out)
{
    finalize(c, false);
    c.suite.tol = c.tol;
    const auto reports = run_all(c.suite);
    bool all = true;
    for (const auto& r : reports) {
        all = all && r.passed;
    }
    if (c.format == output_format::csv) {
        out << "identity_name,draws,max_residual,tol,passed\n";
        for (const auto& r : reports) {
            out << r.name << ',' << r.draws << ',' << detail::fmt17(r.max_residual) << ',' << detail::fmt17(r.tol)
                << ',' << (r.passed ? "true" : "false") << '\n';
        }
    } else {
        auto arr = json::array();
        for (const auto& r : reports) {
            arr.push_back(report_json(r));
        }
        out << arr.dump(2) << '\n';
    }
    return all ? ok : identity_failed;
}

inline int cmd_backlund(RunConfig c, std::ostream& out)
{
    finalize(c, true);
    if (c.format != output_format::json) {
        throw config_error("format", "backlund writes JSON only");
    }
    if (c.tol) {
        c.solver.tol = *c.tol;
    }
    const auto p = model_of(c);
    const auto phase = phase_of(c, p);
    const cplx cc = c.c_at(0);
    const WeightVector mu = solve_next(phase.lambda(), phase.t(), cc, c.solver);
    // A root pinned against a theta zero can reproduce t only up to underflow.
    std::optional<BacklundStep> got;
    try {
        got.emplace(BacklundStep::from_weights(phase.lambda(), mu, cc, c.u));
    } catch (const std::invalid_argument& e) {
        throw degenerate_solution(std::string("backlund: solved mu is unusable: ") + e.what());
    }
    const auto& step = *got;

    double ks = 0.0;
    for (int kp = 0; kp < p.n(); ++kp) {
        ks = std::max(ks, ks_identity_residual(phase.lambda().values(), mu.values(), p.shift(), kp, p.torus()));
    }
    // t reproduced from the solved mu, relative to the input t.
    double solve = 0.0;
    for (int k = 0; k < p.n(); ++k) {
        solve = std::max(solve, std::abs(step.t()[k] - phase.t()[k]) / std::abs(phase.t()[k]));
    }
    const json res{{"lax", lax_equation_residual(c.z_probe, step)},
                   {"eigen", eigenvector_residual(step)},
                   {"kernel", kernel_residual(step)},
                   {"ks", ks},
                   {"solve", solve}};
    const json doc{{"n", p.n()},
                   {"lambda", detail::cj(phase.lambda().values())},
                   {"t", detail::cj(phase.t())},
                   {"c", detail::cj(cc)},
                   {"u", detail::cj(step.u())},
                   {"v", detail::cj(step.v())},
                   {"mu", detail::cj(mu.values())},
                   {"t_tilde", detail::cj(step.t_tilde())},
                   {"C", detail::cj(step.C())},
                   {"residuals", res}};
    out << doc.dump(2) << '\n';
    for (const auto& [key, val] : res.items()) {
        if (!(val.get<double>() < c.residual_gate)) {
            return identity_failed;
        }
    }
    return ok;
}

inline const char* csv_header = "a,k,re_lambda,im_lambda,re_t,im_t,re_c,im_c,rs_residual";

// rs_residual(a) for interior points; 0 at the ends where the three-point relation is undefined.
inline std::vector<double> trajectory_residuals(const Trajectory& traj)
{
    const auto& s = traj.steps;
    std::vector<double> r(s.size(), 0.0);
    for (std::size_t a = 1; a + 1 < s.size(); ++a) {
        r[a] = discrete_rs_residual(s[a - 1].lambda, s[a].lambda, s[a + 1].lambda, s[a - 1].c, s[a].c);
    }
    return r;
}

inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out)
{
    using detail::fmt17;
    const auto res = trajectory_residuals(traj);
    out << csv_header << '\n';
    for (std::size_t a = 0; a < traj.steps.size(); ++a) {
        const auto& pt = traj.steps[a];
        for (int k = 0; k < pt.lambda.size(); ++k) {
            out << pt.a << ',' << k << ',' << fmt17(pt.lambda[k].real()) << ',' << fmt17(pt.lambda[k].imag()) << ','
                << fmt17(pt.t[k].real()) << ',' << fmt17(pt.t[k].imag()) << ',' << fmt17(pt.c.real()) << ','
                << fmt17(pt.c.imag()) << ',' << fmt17(res[a]) << '\n';
        }
    }
}

inline json trajectory_json(const Trajectory& traj)
{
    const auto res = trajectory_residuals(traj);
    auto steps = json::array();
    for (std::size_t a = 0; a < traj.steps.size(); ++a) {
        const auto& pt = traj.steps[a];
        steps.push_back({{"a", pt.a},
                         {"lambda", detail::cj(pt.lambda.values())},
                         {"t", detail::cj(pt.t)},
                         {"c", detail::cj(pt.c)},
                         {"rs_residual", res[a]}});
    }
    return {{"v", detail::cj(traj.v)}, {"u_sequence", detail::cj(traj.u_sequence)}, {"steps", steps}};
}

inline int cmd_evolve(RunConfig c, std::ostream& out)
{
    finalize(c, true);
    if (c.tol) {
        c.solver.tol = *c.tol;
    }
    const auto p = model_of(c);
    auto traj = start_trajectory(phase_of(c, p), c.c_at(0), c.v);
    std::optional<int> aborted;
    for (int a = 0; a < c.steps; ++a) {
        try {
            // copy in: a throwing step must leave the good prefix intact
            traj = step(traj, c.c_at(a + 1), c.solver);
        } catch (const error&) {
            aborted = a + 1;
            break;
        }
    }
    bool within = true;
    for (const double r : trajectory_residuals(traj)) {
        within = within && r < c.residual_gate;
    }
    if (c.format == output_format::csv) {
        write_trajectory_csv(traj, out);
        if (aborted) {
            out << "# aborted at step a=" << *aborted << '\n';
        }
    } else {
        auto doc = trajectory_json(traj);
        if (aborted) {
            doc["aborted_at"] = *aborted;
        }
        out << doc.dump(2) << '\n';
    }
    if (aborted) {
        return not_converged;
    }
    return within ? ok : identity_failed;
}

// Full command line, in-process. Output goes to --out if given, else to `out`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Elliptic Ruijsenaars-Schneider Backlund transformations", "rs_backlund"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<int> steps;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    std::optional<std::string> out_path;
    std::optional<std::string> format;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--steps", steps, "number of evolution steps");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--tol", tol, "tolerance override");
        sub->add_option("--out", out_path, "output file");
        sub->add_option("--format", format, "json or csv");
    };
    auto* verify = app.add_subcommand("verify", "run the identity suite");
    auto* backlund = app.add_subcommand("backlund", "one Backlund step");
    auto* evolve = app.add_subcommand("evolve", "discrete time evolution");
    for (auto* s : {verify, backlund, evolve}) {
        add_common(s);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o;
        std::ostringstream r;
        const int code = app.exit(e, o, r);
        out << o.str();
        err << r.str();
        return code == 0 ? ok : config_invalid;
    }

    try {
        json j = json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                throw config_error("--config", "cannot open " + config_path);
            }
            try {
                j = json::parse(in);
            } catch (const json::parse_error& e) {
                throw config_error("--config", e.what());
            }
        }
        if (steps) {
            j["steps"] = *steps;
        }
        if (seed) {
            j["seed"] = *seed;
        }
        if (tol) {
            j["tol"] = *tol;
        }
        if (out_path) {
            j["output_path"] = *out_path;
        }
        if (format) {
            j["format"] = *format;
        }
        const RunConfig cfg = parse_config(j);

        std::ostringstream buf;
        int code = ok;
        if (verify->parsed()) {
            code = cmd_verify(cfg, buf);
        } else if (backlund->parsed()) {
            code = cmd_backlund(cfg, buf);
        } else {
            code = cmd_evolve(cfg, buf);
        }
        if (cfg.output_path.empty()) {
            out << buf.str();
        } else {
            std::ofstream f(cfg.output_path, std::ios::binary);
            if (!f) {
                throw config_error("output_path", "cannot write " + cfg.output_path);
            }
            f << buf.str();
        }
        return code;
    } catch (const config_error& e) {
        err << e.what() << '\n';
        return config_invalid;
    } catch (const no_convergence& e) {
        err << e.what() << '\n';
        return not_converged;
    } catch (const degenerate_solution& e) {
        err << e.what() << '\n';
        return not_converged;
    } catch (const error& e) {
        err << e.what() << '\n';
        return identity_failed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return identity_failed;
    }
}

} // namespace rsb::cli

#endif
