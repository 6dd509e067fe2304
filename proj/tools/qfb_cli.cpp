// qfb: command-line front end for the monitored-qubit feedback simulator.
//
//   qfb ensemble --omega 10 --n_traj 10000 --dt 1e-3
//   qfb sweep --config sweep.cfg --omega_grid 20,30,40,50,60,70
//   qfb simulate --manifest qfb_out/manifest.json
//
// Exit codes: 0 success, 1 a check or search came out negative,
// 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "qfb/checks.hpp"
#include "qfb/config.hpp"
#include "qfb/ensemble.hpp"
#include "qfb/fit.hpp"
#include "qfb/optimizer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace qfb;

namespace {

struct Run {
    RunConfig config;
    fs::path dir;
    std::vector<std::string> artifacts;

    std::ofstream open(const std::string& name) {
        fs::create_directories(dir);
        std::ofstream os(dir / name);
        if (!os) throw ConfigError("output", "cannot write " + (dir / name).string());
        artifacts.push_back(name);
        return os;
    }

    unsigned workers() const { return static_cast<unsigned>(config.count("workers")); }

    SimParams params() const {
        SimParams guess;
        guess.k = config.real("k");
        guess.gamma = config.real("gamma") * guess.k;
        guess.nT = config.real("nT");
        guess.omega = config.has("omega") ? config.real("omega") * guess.k : 0.0;
        return config.sim_params(burn_in_heuristic(guess));
    }

    PolarState initial(const SimParams& p) const {
        if (!config.has("a0")) return thermal_equilibrium(p.nT);
        return PolarState::make(config.real("a0"), config.real("theta0"));
    }
};

void print_estimate(const std::string& label, const EnsembleEstimate& e) {
    std::cout << std::setprecision(6) << label << "epsilon = " << e.epsilon_mean << " +- "
              << e.std_error << "  (n_traj " << e.n_traj << ", t_burn " << e.t_burn << ", t_avg "
              << e.t_avg << ")\n";
}

int simulate(Run& run) {
    const SimParams p = run.params();
    const auto policy = run.config.policy(p);
    WienerSource noise(p.seed, 0);
    const auto r = simulate_trajectory(run.initial(p), policy, p, noise,
                                       {static_cast<std::size_t>(std::max<std::uint64_t>(1, run.config.count("path_stride")))});
    auto os = run.open("trajectory.csv");
    write_path_csv(os, r.path);
    std::cout << std::setprecision(6) << "time-averaged epsilon " << r.epsilon_mean
              << ", final a " << r.final_state.a << ", theta " << r.final_state.theta << '\n';
    return 0;
}

int ensemble(Run& run) {
    const SimParams p = run.params();
    const auto policy = run.config.policy(p);
    EnsembleOptions opts;
    opts.workers = run.workers();
    if (run.config.has("a0")) opts.initial = run.initial(p);
    const auto n = run.config.count("n_traj");
    const auto e = estimate_steady_error(p, policy, n, opts);
    {
        auto os = run.open("ensemble.csv");
        os << ensemble_csv_header << '\n';
        write_ensemble_row(os, p, policy.coefficients(), e, run.config.hash());
    }
    print_estimate("", e);
    std::cout << "halves " << e.first_half_mean << " / " << e.second_half_mean << " (diff se "
              << e.half_difference_std_error << "), <theta^2> " << e.theta2_mean << '\n';

    if (const auto bins = run.config.count("bins"); bins > 0) {
        const auto profile = epsilon_profile(p, policy, n, bins, opts);
        auto os = run.open("profile.csv");
        os << "t,epsilon_mean,std_error,config_hash\n" << std::setprecision(17);
        for (const auto& b : profile) {
            os << b.t_mid << ',' << b.mean << ',' << b.std_error << ',' << run.config.hash() << '\n';
        }
        const auto slope = profile_slope(profile, p.t_burn);
        std::cout << "epsilon(t) slope after burn-in " << slope.mean << " +- " << slope.std_error << '\n';
    }
    return 0;
}

int sweep(Run& run) {
    const SimParams p = run.params();
    const auto proto = run.config.published_protocol(p);
    EnsembleOptions opts;
    opts.workers = run.workers();
    const auto s = sweep_switch_point(p, run.config.reals("omega_grid"), run.config.count("n_traj"),
                                      proto, opts);
    auto os = run.open("sweep.csv");
    os << ensemble_csv_header << ",difference,difference_std_error\n";
    const std::string hash = run.config.hash();
    for (const auto& pt : s.points) {
        SimParams q = p;
        q.omega = pt.omega_over_k * p.k;
        std::ostringstream row0, row1;
        write_ensemble_row(row0, q, {0.0, pt.c1, 0, 0}, pt.at_zero, hash);
        write_ensemble_row(row1, q, {pi / 2, pt.c1, 0, 0}, pt.at_right, hash);
        auto strip = [](std::string r) { r.pop_back(); return r; };
        os << strip(row0.str()) << ',' << std::setprecision(17) << pt.difference << ','
           << pt.difference_std_error << '\n';
        os << strip(row1.str()) << ',' << pt.difference << ',' << pt.difference_std_error << '\n';
        std::cout << std::setprecision(5) << "omega/k " << pt.omega_over_k << ": eps(c0=0) "
                  << pt.at_zero.epsilon_mean << ", eps(c0=pi/2) " << pt.at_right.epsilon_mean
                  << ", paired diff " << pt.difference << " +- " << pt.difference_std_error << '\n';
    }
    os << "# crossing_omega_over_k,";
    if (s.crossing_omega_over_k) {
        os << std::setprecision(17) << *s.crossing_omega_over_k << '\n';
        std::cout << "crossing at omega/k = " << *s.crossing_omega_over_k << '\n';
        return 0;
    }
    os << "none\n";
    std::cout << "no crossing inside the grid\n";
    return 1;
}

OptimizeOptions optimize_options(const Run& run) {
    OptimizeOptions o;
    o.n_traj = run.config.count("n_traj");
    o.budget = run.config.count("budget");
    o.fd_step = run.config.real("fd_step");
    o.workers = run.workers();
    o.frozen[0] = run.config.flag("freeze_c0");
    return o;
}

void write_optimization(std::ostream& os, const SimParams& p, const OptimizationResult& r,
                        const std::string& hash) {
    write_ensemble_row(os, p, r.coefficients, r.estimate, hash);
}

int optimize(Run& run) {
    const SimParams p = run.params();
    const OptimizeOptions o = optimize_options(run);
    const auto degree = static_cast<int>(run.config.integer("degree"));
    auto os = run.open("optimize.csv");
    os << ensemble_csv_header << '\n';
    OptimizationResult best;
    if (o.frozen[0] || degree == 3) {
        best = optimize_coefficients(p, run.config.coefficients(), degree, o);
    } else {
        const auto search = optimize_protocol(p, run.config.real("c1"), run.config.count("scan_points"), o);
        for (const auto& pt : search.scan) {
            std::cout << std::setprecision(5) << "scan c0 " << pt.c0 << ": " << pt.epsilon << " +- "
                      << pt.std_error << '\n';
        }
        std::cout << (search.discrete_c0 ? "c0 minimum at an endpoint; searched c0 in {0, pi/2}\n"
                                         : "interior c0 minimum; searched c0 continuously\n");
        best = search.best;
    }
    write_optimization(os, p, best, run.config.hash());
    const auto& c = best.coefficients;
    std::cout << std::setprecision(6) << "coefficients c0 " << c.c0 << ", c1 " << c.c1 << ", c2 "
              << c.c2 << ", c3 " << c.c3 << "  (" << best.evaluations << " evaluations"
              << (best.converged ? "" : ", budget exhausted") << ")\n";
    std::cout << "CRN objective " << best.crn_initial << " -> " << best.crn_best << '\n';
    print_estimate("fresh noise: ", best.estimate);
    return 0;
}

std::vector<C1Point> read_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("points", "cannot open " + path);
    std::vector<C1Point> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || !(std::isdigit(line[0]) || line[0] == '-' || line[0] == '.')) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        C1Point pt;
        if (!(row >> pt.omega_over_k >> pt.c1)) throw ConfigError("points", "bad row '" + line + "'");
        out.push_back(pt);
    }
    return out;
}

int fit(Run& run) {
    std::vector<C1Point> points;
    if (run.config.has("points")) {
        points = read_points(run.config.text("points"));
    } else {
        const SimParams base = run.params();
        OptimizeOptions o = optimize_options(run);
        o.frozen[0] = true;
        for (double ratio : run.config.reals("omega_grid")) {
            SimParams p = base;
            p.omega = ratio * p.k;
            if (!run.config.has("t_burn")) p.t_burn = burn_in_heuristic(p);
            p.validate();
            const auto r = optimize_coefficients(p, {0.0, run.config.real("c1"), 0, 0}, 1, o);
            points.push_back({ratio, r.coefficients.c1});
            std::cout << std::setprecision(6) << "omega/k " << ratio << ": c1 " << r.coefficients.c1
                      << ", eps " << r.estimate.epsilon_mean << '\n';
        }
    }
    const auto f = fit_c1_curve(points);
    auto os = run.open("fit.csv");
    os << "omega_over_k,c1,model,residual,config_hash\n" << std::setprecision(17);
    for (const auto& pt : points) {
        const double model = c1_model(pt.omega_over_k, f.A, f.B, f.r);
        os << pt.omega_over_k << ',' << pt.c1 << ',' << model << ',' << pt.c1 - model << ','
           << run.config.hash() << '\n';
    }
    os << "# A,B,r,m,sigma\n# " << f.A << ',' << f.B << ',' << f.r << ',' << f.m << ',' << f.sigma << '\n';
    std::cout << std::setprecision(6) << "A " << f.A << ", B " << f.B << ", r " << f.r << ", m " << f.m
              << ", sigma " << f.sigma << '\n';
    return 0;
}

int check(Run& run) {
    bool all = true;
    auto os = run.open("check.csv");
    os << "check,passed,detail\n";
    for (const auto& c : run_checks()) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        os << c.name << ',' << (c.passed ? "true" : "false") << ",\"" << c.detail << "\"\n";
        all = all && c.passed;
    }
    return all ? 0 : 1;
}

void load_manifest(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("manifest", "cannot open " + path);
    json m;
    try {
        m = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("manifest", e.what());
    }
    if (!m.contains("config") || !m["config"].is_object()) throw ConfigError("manifest", "no config object");
    for (const auto& [key, value] : m["config"].items()) {
        config.set(key, value.is_string() ? value.get<std::string>() : value.dump());
    }
}

void write_manifest(Run& run, int status, double seconds) {
    json m;
    m["version"] = QFB_VERSION;
    m["mode"] = run.config.mode();
    json cfg = json::object();
    for (const auto& [key, value] : run.config.resolved()) cfg[key] = value;
    m["config"] = cfg;
    m["config_hash"] = run.config.hash();
    m["seed"] = run.config.integer("seed");
    m["wall_time_s"] = seconds;
    m["exit_status"] = status;
    m["artifacts"] = run.artifacts;
    fs::create_directories(run.dir);
    std::ofstream os(run.dir / "manifest.json");
    os << m.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feedback control of a continuously monitored qubit"};
    app.set_help_flag("-h,--help", "Show help");
    std::string mode, config_file, manifest_file;
    app.add_option("mode", mode, "simulate|ensemble|sweep|optimize|fit|check");
    app.add_option("--config", config_file, "key = value file; flags win over it");
    app.add_option("--manifest", manifest_file, "rerun the resolved config of a manifest");
    std::map<std::string, std::string> flags;
    for (const auto& k : config_keys) {
        if (std::string(k.name) == "mode") continue;
        app.add_option(std::string("--") + k.name, flags[k.name], k.help);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    Run run;
    int status = 0;
    const auto start = std::chrono::steady_clock::now();
    try {
        if (!manifest_file.empty()) load_manifest(run.config, manifest_file);
        if (!config_file.empty()) run.config.read_file(config_file);
        for (const auto& [key, value] : flags) {
            if (app.count("--" + key) > 0) run.config.set(key, value);
        }
        if (!mode.empty()) run.config.set("mode", mode);
        run.config.validate_mode();
        run.dir = run.config.text("output");

        const std::string m = run.config.mode();
        if (m == "simulate") status = simulate(run);
        else if (m == "ensemble") status = ensemble(run);
        else if (m == "sweep") status = sweep(run);
        else if (m == "optimize") status = optimize(run);
        else if (m == "fit") status = fit(run);
        else status = check(run);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::domain_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(run, status, seconds);
    std::cout << "manifest: " << (run.dir / "manifest.json").string() << '\n';
    return status;
}
