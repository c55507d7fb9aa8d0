// critns command-line front end.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "critns.hpp"

namespace {

using namespace critns;

struct CommonFlags {
    std::string config;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<int> grid;
    std::optional<double> horizon;
    int threads = 0;
};

void add_common(CLI::App* sub, CommonFlags& f, bool config_required) {
    auto* c = sub->add_option("--config", f.config, "suite config file");
    if (config_required) c->required();
    sub->add_option("--output", f.output, "output directory (overrides [suite] output)");
    sub->add_option("--seed", f.seed, "seed for random data without an explicit seed");
    sub->add_option("--grid", f.grid, "modes per axis for every scenario");
    sub->add_option("--horizon", f.horizon, "time horizon for every scenario");
    sub->add_option("--threads", f.threads, "worker threads (default: CRITNS_THREADS or 1)");
}

SuiteSpec load(const CommonFlags& f) {
    SuiteOverrides ov;
    if (!f.output.empty()) ov.output_dir = f.output;
    ov.seed = f.seed;
    ov.grid = f.grid;
    ov.horizon = f.horizon;
    return load_suite(f.config, ov);
}

SuiteSpec only(SuiteSpec s, std::optional<ScenarioKind> kind) {
    if (!kind) return s;
    std::erase_if(s.scenarios, [&](const ScenarioSpec& sc) { return sc.kind != *kind; });
    return s;
}

int run_and_report(const SuiteSpec& suite, int threads) {
    const auto sum = run_suite(suite, threads);
    for (std::size_t i = 0; i < sum.results.size(); ++i) {
        const auto& r = sum.results[i];
        std::printf("%-28s %s\n", suite.scenarios[i].name.c_str(),
                    r.infrastructure_error ? "ERROR" : (r.pass() ? "PASS" : "FAIL"));
        if (r.infrastructure_error) std::printf("    %s\n", r.error.c_str());
        for (const auto& a : r.audits) {
            std::printf("    %-24s %-4s value=%.6g tol=%.6g\n", a.name.c_str(), a.pass ? "ok" : "FAIL", a.value, a.tolerance);
        }
    }
    if (!sum.error.empty()) std::printf("summary not written: %s\n", sum.error.c_str());
    std::printf("exit code %d\n", sum.exit_code());
    return sum.exit_code();
}

int pressure_report(const SuiteSpec& suite) {
    for (const auto& s : suite.scenarios) {
        if (s.kind != ScenarioKind::simulate) continue;
        const SpectralField u = place_profile(ProfileSpec{s.datum, s.lambda, s.x0}, s.grid);
        const SpectralScalar p = pressure_from_velocity(u);
        const double u3 = lebesgue_norm(u, 3.0);
        const double p32 = lebesgue_norm(p, 1.5);
        nlohmann::ordered_json j{{"scenario", s.name},
                                 {"u_l3", u3},
                                 {"p_l3_2", p32},
                                 {"p_linf", lebesgue_norm(p, std::numeric_limits<double>::infinity())},
                                 {"calderon_zygmund_ratio", u3 > 0.0 ? p32 / (u3 * u3) : 0.0}};
        write_file_atomic(s.output_dir / "pressure.json", j.dump(2) + "\n");
        std::printf("%s\n", j.dump().c_str());
    }
    return 0;
}

int compactness_report(const SuiteSpec& suite, int samples) {
    for (const auto& s : suite.scenarios) {
        if (s.kind != ScenarioKind::simulate) continue;
        const SpectralField u0 = place_profile(ProfileSpec{s.datum, s.lambda, s.x0}, s.grid);
        const Trajectory traj = solve(u0, s.horizon, s.solver);
        const SimilarityFrame frame = similarity_frame_track(traj);
        std::vector<double> times;
        const std::size_t m = traj.size();
        const int k = std::max(2, std::min<int>(samples, static_cast<int>(m)));
        for (int i = 0; i < k; ++i) {
            const std::size_t j = (m - 1) * i / (k - 1);
            if (frame.defined[j]) times.push_back(traj.times()[j]);
        }
        nlohmann::ordered_json j{{"scenario", s.name}, {"sample_times", times}};
        j["lambda_t"] = frame.lambda_t;
        j["distances"] = times.size() >= 2 ? nlohmann::ordered_json(compactness_diagnostic(traj, frame, times))
                                           : nlohmann::ordered_json::array();
        write_file_atomic(s.output_dir / "compactness.json", j.dump(2) + "\n");
        std::printf("%s: %zu sample times written to %s\n", s.name.c_str(), times.size(),
                    (s.output_dir / "compactness.json").string().c_str());
    }
    return 0;
}

int contraction_demo(int points, const std::string& output) {
    std::string csv = "four_eta_y,fixed_point,closed_form,radius_bound,iterations,residual\n";
    const double eta = 1.0;
    for (int i = 0; i < points; ++i) {
        const double q = 0.99 * i / std::max(1, points - 1);
        const double y = q / (4.0 * eta);
        BilinearFixedPointProblem<double> p;
        p.y = y;
        p.bilinear = [eta](const double& a, const double& b) { return eta * a * b; };
        p.norm = [](const double& a) { return std::abs(a); };
        p.eta = eta;
        p.tol = 1e-15;
        p.max_iter = 100000;
        const auto r = solve_fixed_point(p);
        const double closed = y == 0.0 ? 0.0 : 2.0 * y / (1.0 + std::sqrt(1.0 - 4.0 * eta * y));
        char row[256];
        std::snprintf(row, sizeof row, "%.17g,%.17g,%.17g,%.17g,%d,%.3g\n", q, r.solution, closed, r.radius_bound,
                      r.iterations, r.residual);
        csv += row;
    }
    if (output.empty()) std::fputs(csv.c_str(), stdout);
    else write_file_atomic(std::filesystem::path(output) / "contraction.csv", csv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"critns: mild-solution laboratory for 3D Navier-Stokes on a periodic box"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tool_version));

    CommonFlags sim, aud, sca, pro, pre, com;
    auto* s_sim = app.add_subcommand("simulate", "solve and audit the simulate scenarios of a suite");
    add_common(s_sim, sim, true);
    auto* s_aud = app.add_subcommand("audit", "run every scenario of a suite and report the audits");
    add_common(s_aud, aud, true);
    auto* s_sca = app.add_subcommand("scaling-check", "run the scaling scenarios of a suite");
    add_common(s_sca, sca, true);
    auto* s_pro = app.add_subcommand("profiles", "run the profile orthogonality sweeps of a suite");
    add_common(s_pro, pro, true);
    auto* s_pre = app.add_subcommand("pressure", "pressure statistics of each simulate scenario's datum");
    add_common(s_pre, pre, true);
    auto* s_com = app.add_subcommand("compactness", "similarity frame and renormalized distances per scenario");
    add_common(s_com, com, true);
    int samples = 5;
    s_com->add_option("--samples", samples, "number of sample times");
    auto* s_con = app.add_subcommand("contraction-demo", "scalar model x = y + eta x^2 against the radius formula");
    CommonFlags con;
    add_common(s_con, con, false);
    int points = 50;
    s_con->add_option("--points", points, "number of 4*eta*y values in [0, 0.99]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*s_sim) return run_and_report(only(load(sim), ScenarioKind::simulate), sim.threads);
        if (*s_aud) return run_and_report(load(aud), aud.threads);
        if (*s_sca) return run_and_report(only(load(sca), ScenarioKind::scaling), sca.threads);
        if (*s_pro) return run_and_report(only(load(pro), ScenarioKind::profiles), pro.threads);
        if (*s_pre) return pressure_report(load(pre));
        if (*s_com) return compactness_report(load(com), samples);
        if (*s_con) return contraction_demo(points, con.output);
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
