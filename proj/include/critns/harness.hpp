#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "critns/analytic_datum.hpp"
#include "critns/criticality.hpp"
#include "critns/error.hpp"
#include "critns/mild_solver.hpp"
#include "critns/operators.hpp"
#include "critns/snapshot_io.hpp"
#include "critns/symmetry_profiles.hpp"
#include "critns/trajectory.hpp"

namespace critns {

inline constexpr std::string_view tool_version = "critns 0.1.0";

// ---------------------------------------------------------------------------------------------------------------
// Config text: "[section]" or "[section name]" headers, "key = value" lines, ';' or '#' comments.

struct IniEntry {
    std::string key;
    std::string value;
    int line = 0;
    int column = 0; ///< column of the first value character
};

struct IniSection {
    std::string kind; ///< "suite" or "scenario"
    std::string name;
    int line = 0;
    std::vector<IniEntry> entries;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool valid_identifier(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

} // namespace detail

inline std::vector<IniSection> parse_ini(std::string_view text) {
    std::vector<IniSection> out;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view raw = text.substr(pos, eol - pos);
        ++line_no;
        pos = eol + 1;
        // Strip comments: ';' or '#' at line start or preceded by whitespace.
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if ((raw[i] == ';' || raw[i] == '#') && (i == 0 || raw[i - 1] == ' ' || raw[i - 1] == '\t')) {
                raw = raw.substr(0, i);
                break;
            }
        }
        const std::size_t lead = raw.find_first_not_of(" \t\r");
        if (lead == std::string_view::npos) {
            if (eol == text.size()) break;
            continue;
        }
        const std::string_view body = detail::trim(raw);
        if (body.front() == '[') {
            if (body.back() != ']') throw ParseError("unterminated section header", line_no, int(lead + 1));
            const std::string_view inner = detail::trim(body.substr(1, body.size() - 2));
            IniSection s;
            s.line = line_no;
            const std::size_t sp = inner.find_first_of(" \t");
            s.kind = std::string(inner.substr(0, sp));
            if (sp != std::string_view::npos) s.name = std::string(detail::trim(inner.substr(sp)));
            if (s.kind != "suite" && s.kind != "scenario") {
                throw ParseError("unknown section '" + s.kind + "'", line_no, int(lead + 2));
            }
            if (s.kind == "scenario" && !detail::valid_identifier(s.name)) {
                throw ParseError("scenario needs a name made of [A-Za-z0-9_.-]", line_no, int(lead + 1));
            }
            if (s.kind == "suite" && !s.name.empty()) throw ParseError("[suite] takes no name", line_no, int(lead + 1));
            out.push_back(std::move(s));
        } else {
            const std::size_t eq = raw.find('=');
            if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no, int(lead + 1));
            if (out.empty()) throw ParseError("key outside of any section", line_no, int(lead + 1));
            const std::string_view key = detail::trim(raw.substr(0, eq));
            if (!detail::valid_identifier(key)) throw ParseError("invalid key", line_no, int(lead + 1));
            const std::string_view rest = raw.substr(eq + 1);
            const std::size_t vstart = rest.find_first_not_of(" \t");
            const std::string_view value = detail::trim(rest);
            if (value.empty()) throw ParseError("missing value for '" + std::string(key) + "'", line_no, int(eq + 2));
            for (const auto& e : out.back().entries) {
                if (e.key == key) throw ParseError("duplicate key '" + std::string(key) + "'", line_no, int(lead + 1));
            }
            out.back().entries.push_back({std::string(key), std::string(value), line_no, int(eq + 2 + vstart)});
        }
        if (eol == text.size()) break;
    }
    return out;
}

// ---------------------------------------------------------------------------------------------------------------

enum class ScenarioKind { simulate, scaling, profiles };

inline std::string to_string(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::simulate: return "simulate";
    case ScenarioKind::scaling: return "scaling";
    default: return "profiles";
    }
}

struct ScenarioSpec {
    std::string name;
    ScenarioKind kind = ScenarioKind::simulate;
    AnalyticDatum datum = TaylorGreen{};
    double lambda = 1.0;     ///< placement scale of the datum
    Point x0{0.0, 0.0, 0.0}; ///< placement core
    GridSpec grid{};
    SolverConfig solver{};
    double horizon = 1.0;
    std::vector<std::string> audits;
    std::map<std::string, double> tolerances; ///< per-audit overrides of the default tolerance
    std::filesystem::path output_dir;
    int snapshot_stride = 0; ///< 0 keeps only the first and last snapshot
    std::vector<double> scales{2.0};        ///< scaling: dilation factors
    std::string sweep = "separation";       ///< profiles: "separation" (fractions of L) or "ratio"
    std::vector<double> sweep_values{0.125, 0.25, 0.5};

    void validate() const {
        if (name.empty()) throw DomainError("scenario name must be nonempty");
        if (!(horizon > 0.0)) throw DomainError("scenario " + name + ": horizon must be positive");
        solver.validate();
        if (snapshot_stride < 0) throw DomainError("scenario " + name + ": snapshot_stride must be >= 0");
    }
};

struct SuiteSpec {
    std::filesystem::path output_dir = "critns_out";
    std::uint64_t seed = 1;
    std::vector<ScenarioSpec> scenarios;
};

/// Command-line overrides applied on top of a parsed suite.
struct SuiteOverrides {
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> grid;
    std::optional<double> horizon;
};

inline const std::vector<std::string>& default_audits(ScenarioKind k) {
    static const std::vector<std::string> sim{"horizon", "divergence", "energy", "energy_equality", "interpolation"};
    static const std::vector<std::string> sc{"scale_invariance", "scaling"};
    static const std::vector<std::string> pr{"pythagorean_monotone", "orthogonality_monotone", "pythagorean_final"};
    return k == ScenarioKind::simulate ? sim : (k == ScenarioKind::scaling ? sc : pr);
}

inline const std::vector<std::string>& known_audits(ScenarioKind k) {
    static const std::vector<std::string> sim{"horizon",      "divergence",    "energy",       "energy_equality",
                                              "decay",        "interpolation", "taylor_green", "taylor_green_pressure",
                                              "residual",     "uniqueness"};
    return k == ScenarioKind::simulate ? sim : default_audits(k);
}

namespace detail {

struct ValueReader {
    const IniEntry& e;

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what + " for '" + e.key + "'", e.line, e.column); }

    /// Real number; a trailing "pi" multiplies by pi ("2pi", "0.5 pi", "pi").
    double real() const {
        std::string s(trim(e.value));
        double mult = 1.0;
        if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
            mult = std::numbers::pi;
            s = std::string(trim(s.substr(0, s.size() - 2)));
            if (s.empty()) return mult;
        }
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            fail("expected a number");
        }
        if (used != s.size() || !std::isfinite(v)) fail("expected a number");
        return v * mult;
    }
    long long integer() const {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(e.value, &used);
        } catch (const std::exception&) {
            fail("expected an integer");
        }
        if (used != e.value.size()) fail("expected an integer");
        return v;
    }
    std::uint64_t u64() const {
        if (e.value.empty() || e.value.front() == '-') fail("expected an unsigned integer");
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(e.value, &used);
        } catch (const std::exception&) {
            fail("expected an unsigned integer");
        }
        if (used != e.value.size()) fail("expected an unsigned integer");
        return v;
    }
    std::vector<std::string> words() const {
        std::vector<std::string> out;
        std::string_view v = e.value;
        while (!v.empty()) {
            const std::size_t c = v.find(',');
            const auto w = trim(v.substr(0, c));
            if (w.empty()) fail("empty list item");
            out.emplace_back(w);
            if (c == std::string_view::npos) break;
            v.remove_prefix(c + 1);
        }
        return out;
    }
    std::vector<double> reals() const {
        std::vector<double> out;
        for (const auto& w : words()) {
            IniEntry sub = e;
            sub.value = w;
            out.push_back(ValueReader{sub}.real());
        }
        return out;
    }
};

} // namespace detail

/// Builds a suite from config text; every semantic error is reported with the offending line and column.
inline SuiteSpec parse_suite(std::string_view text, const SuiteOverrides& ov = {}) {
    const auto sections = parse_ini(text);
    SuiteSpec suite;
    std::map<std::string, int> names;
    bool seen_suite = false;
    for (const auto& s : sections) {
        if (s.kind != "suite") continue;
        if (seen_suite) throw ParseError("duplicate [suite] section", s.line, 1);
        seen_suite = true;
        for (const auto& e : s.entries) {
            detail::ValueReader r{e};
            if (e.key == "output") suite.output_dir = e.value;
            else if (e.key == "seed") suite.seed = r.u64();
            else throw ParseError("unknown suite key '" + e.key + "'", e.line, 1);
        }
    }
    if (ov.output_dir) suite.output_dir = *ov.output_dir;
    if (ov.seed) suite.seed = *ov.seed;

    for (const auto& s : sections) {
        if (s.kind != "scenario") continue;
        if (names.count(s.name)) throw ParseError("duplicate scenario name '" + s.name + "'", s.line, 1);
        names[s.name] = s.line;
        ScenarioSpec sc;
        sc.name = s.name;
        sc.output_dir = suite.output_dir / s.name;
        std::string datum_kind = "taylor_green";
        int n = 32;
        double L = 2.0 * std::numbers::pi;
        double dealias = 2.0 / 3.0;
        TaylorGreen tg;
        BandLimitedRandom br;
        br.seed = suite.seed;
        LocalizedVortex lv;
        bool have_audits = false;
        for (const auto& e : s.entries) {
            detail::ValueReader r{e};
            const std::string& k = e.key;
            if (k == "type") {
                if (e.value == "simulate") sc.kind = ScenarioKind::simulate;
                else if (e.value == "scaling") sc.kind = ScenarioKind::scaling;
                else if (e.value == "profiles") sc.kind = ScenarioKind::profiles;
                else r.fail("unknown scenario type '" + e.value + "'");
            } else if (k == "datum") {
                if (e.value != "taylor_green" && e.value != "band_limited_random" && e.value != "localized_vortex" &&
                    e.value != "zero") {
                    r.fail("unknown datum '" + e.value + "'");
                }
                datum_kind = e.value;
            } else if (k == "amplitude") {
                tg.amplitude = lv.amplitude = r.real();
            } else if (k == "seed") {
                br.seed = r.u64();
            } else if (k == "slope") {
                br.slope = r.real();
            } else if (k == "k_min") {
                br.k_min = r.real();
            } else if (k == "k_max") {
                br.k_max = r.real();
            } else if (k == "target_hhalf") {
                br.target_hhalf = r.real();
            } else if (k == "width") {
                lv.width = r.real();
            } else if (k == "axis") {
                const auto a = r.integer();
                if (a < 0 || a > 2) r.fail("axis must be 0, 1 or 2");
                lv.axis = static_cast<int>(a);
            } else if (k == "lambda") {
                sc.lambda = r.real();
            } else if (k == "x0") {
                const auto v = r.reals();
                if (v.size() != 3) r.fail("expected three coordinates");
                sc.x0 = {v[0], v[1], v[2]};
            } else if (k == "grid") {
                n = static_cast<int>(r.integer());
            } else if (k == "box_length") {
                L = r.real();
            } else if (k == "dealias") {
                dealias = r.real();
            } else if (k == "dt") {
                sc.solver.dt = r.real();
            } else if (k == "min_dt") {
                sc.solver.min_dt = r.real();
            } else if (k == "quadrature") {
                try {
                    sc.solver.duhamel_quadrature.kind = quadrature_kind_from_string(e.value);
                } catch (const DomainError&) {
                    r.fail("unknown quadrature '" + e.value + "'");
                }
            } else if (k == "quadrature_nodes") {
                sc.solver.duhamel_quadrature.nodes = static_cast<int>(r.integer());
            } else if (k == "picard_tol") {
                sc.solver.picard_tol = r.real();
            } else if (k == "picard_max_iter") {
                sc.solver.picard_max_iter = static_cast<int>(r.integer());
            } else if (k == "blowup_threshold") {
                sc.solver.norm_blowup_threshold = r.real();
            } else if (k == "horizon") {
                sc.horizon = r.real();
            } else if (k == "audits") {
                sc.audits = r.words();
                have_audits = true;
            } else if (k.rfind("tol.", 0) == 0) {
                sc.tolerances[k.substr(4)] = r.real();
            } else if (k == "output") {
                sc.output_dir = suite.output_dir / e.value;
            } else if (k == "snapshot_stride") {
                sc.snapshot_stride = static_cast<int>(r.integer());
            } else if (k == "scales") {
                sc.scales = r.reals();
            } else if (k == "sweep") {
                if (e.value != "separation" && e.value != "ratio") r.fail("sweep must be 'separation' or 'ratio'");
                sc.sweep = e.value;
            } else if (k == "sweep_values") {
                sc.sweep_values = r.reals();
            } else {
                throw ParseError("unknown scenario key '" + k + "'", e.line, 1);
            }
        }
        if (datum_kind == "taylor_green") sc.datum = tg;
        else if (datum_kind == "zero") sc.datum = TaylorGreen{0.0};
        else if (datum_kind == "band_limited_random") sc.datum = br;
        else sc.datum = lv;
        if (ov.grid) n = *ov.grid;
        if (ov.horizon) sc.horizon = *ov.horizon;
        if (!have_audits) sc.audits = default_audits(sc.kind);
        const auto& known = known_audits(sc.kind);
        for (const auto& a : sc.audits) {
            if (std::find(known.begin(), known.end(), a) == known.end()) {
                throw ParseError("audit '" + a + "' is not available for " + to_string(sc.kind) + " scenarios", s.line, 1);
            }
        }
        for (const auto& [a, v] : sc.tolerances) {
            if (std::find(sc.audits.begin(), sc.audits.end(), a) == sc.audits.end()) {
                throw ParseError("tolerance given for audit '" + a + "' which is not run", s.line, 1);
            }
        }
        try {
            sc.grid = GridSpec(n, L, dealias);
            sc.validate();
        } catch (const DomainError& e) {
            throw ParseError(std::string("scenario '") + s.name + "': " + e.what(), s.line, 1);
        }
        suite.scenarios.push_back(std::move(sc));
    }
    return suite;
}

inline SuiteSpec load_suite(const std::filesystem::path& path, const SuiteOverrides& ov = {}) {
    const auto bytes = read_file(path);
    return parse_suite(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), ov);
}

// ---------------------------------------------------------------------------------------------------------------

namespace detail {

inline std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace detail

/// Canonical text form of everything that determines a scenario's results (output paths excluded).
inline std::string canonical_form(const ScenarioSpec& s) {
    using detail::fmt_real;
    std::ostringstream o;
    o << "name=" << s.name << "\nkind=" << to_string(s.kind) << "\ndatum=" << datum_kind(s.datum) << '\n';
    if (const auto* tg = std::get_if<TaylorGreen>(&s.datum)) o << "amplitude=" << fmt_real(tg->amplitude) << '\n';
    if (const auto* r = std::get_if<BandLimitedRandom>(&s.datum)) {
        o << "seed=" << r->seed << "\nslope=" << fmt_real(r->slope) << "\nk_min=" << fmt_real(r->k_min)
          << "\nk_max=" << fmt_real(r->k_max) << "\ntarget_hhalf=" << fmt_real(r->target_hhalf) << '\n';
    }
    if (const auto* v = std::get_if<LocalizedVortex>(&s.datum)) {
        o << "width=" << fmt_real(v->width) << "\namplitude=" << fmt_real(v->amplitude) << "\naxis=" << v->axis << '\n';
    }
    o << "lambda=" << fmt_real(s.lambda) << "\nx0=" << fmt_real(s.x0[0]) << ',' << fmt_real(s.x0[1]) << ','
      << fmt_real(s.x0[2]) << "\ngrid=" << s.grid.n_modes() << "\nbox_length=" << fmt_real(s.grid.box_length())
      << "\ndealias=" << fmt_real(s.grid.dealias_fraction()) << "\ndt=" << fmt_real(s.solver.dt)
      << "\nmin_dt=" << fmt_real(s.solver.min_dt) << "\nquadrature=" << to_string(s.solver.duhamel_quadrature.kind)
      << "\nquadrature_nodes=" << s.solver.duhamel_quadrature.nodes << "\npicard_tol=" << fmt_real(s.solver.picard_tol)
      << "\npicard_max_iter=" << s.solver.picard_max_iter
      << "\nblowup_threshold=" << fmt_real(s.solver.norm_blowup_threshold) << "\nhorizon=" << fmt_real(s.horizon)
      << "\nsnapshot_stride=" << s.snapshot_stride << "\naudits=";
    for (const auto& a : s.audits) o << a << ',';
    o << "\ntolerances=";
    for (const auto& [a, v] : s.tolerances) o << a << ':' << fmt_real(v) << ',';
    o << "\nscales=";
    for (double v : s.scales) o << fmt_real(v) << ',';
    o << "\nsweep=" << s.sweep << "\nsweep_values=";
    for (double v : s.sweep_values) o << fmt_real(v) << ',';
    o << '\n';
    return o.str();
}

inline std::string config_hash(const ScenarioSpec& s) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(canonical_form(s))));
    return buf;
}

struct AuditResult {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct RunManifest {
    std::string scenario;
    std::string config_hash;
    std::string tool_version{critns::tool_version};
    std::string start_wall; ///< ISO-8601 UTC, persisted in timing.json
    std::string end_wall;
    std::vector<std::string> artifacts; ///< relative to the scenario output directory
    std::string terminated_reason;      ///< empty for scenarios without a trajectory
};

struct ScenarioResult {
    RunManifest manifest;
    std::vector<AuditResult> audits;
    bool infrastructure_error = false;
    std::string error;

    bool pass() const {
        return !infrastructure_error && std::all_of(audits.begin(), audits.end(), [](const auto& a) { return a.pass; });
    }
};

namespace detail {

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string norms_csv(const Trajectory& traj) {
    std::string out;
    const auto& f = norm_record_fields();
    for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
    out += '\n';
    for (const auto& r : traj.records()) {
        const auto v = norm_record_values(r);
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt_real(v[i]);
        out += '\n';
    }
    return out;
}

class AuditBook {
public:
    explicit AuditBook(const ScenarioSpec& s) : spec_(s) {}

    bool wants(const std::string& name) const {
        return std::find(spec_.audits.begin(), spec_.audits.end(), name) != spec_.audits.end();
    }
    void add(const std::string& name, double value, double default_tol) {
        const auto it = spec_.tolerances.find(name);
        const double tol = it == spec_.tolerances.end() ? default_tol : it->second;
        results_.push_back({name, value, tol, std::isfinite(value) && value <= tol});
    }
    std::vector<AuditResult> take() {
        // Report in the order the scenario lists them.
        std::vector<AuditResult> out;
        for (const auto& a : spec_.audits)
            for (const auto& r : results_)
                if (r.name == a) out.push_back(r);
        return out;
    }

private:
    const ScenarioSpec& spec_;
    std::vector<AuditResult> results_;
};

inline SpectralField initial_datum(const ScenarioSpec& s) {
    return place_profile(ProfileSpec{s.datum, s.lambda, s.x0}, s.grid);
}

inline double max_divergence_defect(const Trajectory& traj) {
    double d = 0.0;
    for (const auto& u : traj.snapshots()) d = std::max(d, divergence_defect(u));
    return d;
}

/// max_t |u(t) - u_0 e^{-2 t}|_3 and the matching pressure error for Taylor-Green data on a 2*pi-multiple box.
inline std::pair<double, double> taylor_green_errors(const ScenarioSpec& s, const Trajectory& traj) {
    const auto* tg = std::get_if<TaylorGreen>(&s.datum);
    if (!tg) throw DomainError("taylor_green audit needs a taylor_green datum");
    const SpectralField u0 = initial_datum(s);
    // Decay rate is |k|^2 for the placed modes.
    const double m = s.grid.box_length() / (2.0 * std::numbers::pi * s.lambda);
    const double kk = 2.0 * std::pow(s.grid.wavenumber_unit() * m, 2);
    const SpectralScalar p0 = pressure_from_velocity(u0);
    double eu = 0.0;
    double ep = 0.0;
    for (std::size_t j = 0; j < traj.size(); ++j) {
        const double t = traj.times()[j];
        eu = std::max(eu, lebesgue_norm(traj.snapshots()[j] - std::exp(-kk * t) * u0, 3.0));
        const SpectralScalar p = pressure_from_velocity(traj.snapshots()[j]);
        ep = std::max(ep, lebesgue_norm(p - std::exp(-2.0 * kk * t) * p0, std::numeric_limits<double>::infinity()));
    }
    return {eu, ep};
}

inline std::size_t interior_snapshot(const Trajectory& traj) {
    if (traj.size() < 3) throw DomainError("residual audit needs at least three snapshots");
    const double mid = 0.5 * traj.final_time();
    std::size_t best = 1;
    for (std::size_t j = 1; j + 1 < traj.size(); ++j)
        if (std::abs(traj.times()[j] - mid) < std::abs(traj.times()[best] - mid)) best = j;
    return best;
}

inline void run_simulate(const ScenarioSpec& s, ScenarioResult& res, nlohmann::ordered_json& extra) {
    const SpectralField u0 = initial_datum(s);
    const Trajectory traj = solve(u0, s.horizon, s.solver);
    res.manifest.terminated_reason = to_string(traj.terminated_reason);
    const auto& dir = s.output_dir;
    write_file_atomic(dir / "norms.csv", norms_csv(traj));
    res.manifest.artifacts.push_back("norms.csv");
    for (std::size_t j = 0; j < traj.size(); ++j) {
        const bool keep = j == 0 || j + 1 == traj.size() || (s.snapshot_stride > 0 && j % s.snapshot_stride == 0);
        if (!keep) continue;
        char name[48];
        std::snprintf(name, sizeof name, "snapshots/u_%06zu.crns", j);
        export_field(traj.snapshots()[j], dir / name);
        res.manifest.artifacts.push_back(name);
    }
    extra["final_time"] = traj.final_time();
    extra["steps"] = traj.size() - 1;
    if (traj.terminated_reason != TerminationReason::horizon_reached) extra["t_star_estimate"] = traj.t_star_estimate;

    AuditBook book(s);
    if (book.wants("horizon")) book.add("horizon", traj.terminated_reason == TerminationReason::horizon_reached ? 0.0 : 1.0, 0.0);
    if (book.wants("divergence")) book.add("divergence", max_divergence_defect(traj), 1e-10);
    if (book.wants("energy")) book.add("energy", energy_audit(traj), 10.0 * energy_quadrature_bound(traj));
    if (book.wants("energy_equality")) {
        const auto [d, b] = energy_equality_defect(traj);
        book.add("energy_equality", d, 10.0 * b);
    }
    if (book.wants("decay")) {
        const auto d = decay_audit(traj);
        book.add("decay", d.initial > 0.0 ? d.final / d.initial : 0.0, 0.2);
    }
    if (book.wants("interpolation")) {
        const double T = traj.final_time();
        const auto [sup, l2] = e_norm_parts(traj, T);
        const double bound = std::sqrt(sup * l2);
        const double f = f_norm(traj, T);
        book.add("interpolation", bound > 0.0 ? (f - bound) / bound : f, 1e-10);
    }
    if (book.wants("taylor_green") || book.wants("taylor_green_pressure")) {
        const auto [eu, ep] = taylor_green_errors(s, traj);
        if (book.wants("taylor_green")) book.add("taylor_green", eu, 1e-6);
        if (book.wants("taylor_green_pressure")) book.add("taylor_green_pressure", ep, 1e-6);
    }
    if (book.wants("residual")) {
        const double t = traj.times()[interior_snapshot(traj)];
        book.add("residual", std::max(nse_residual(traj, t), vorticity_residual(traj, t)), 1e-4);
    }
    if (book.wants("uniqueness")) {
        SolverConfig a = s.solver;
        book.add("uniqueness", cross_check_uniqueness(u0, s.horizon, a, s.solver), 1e-5);
    }
    res.audits = book.take();
}

inline void run_scaling(const ScenarioSpec& s, ScenarioResult& res, nlohmann::ordered_json& extra) {
    const SpectralField u0 = initial_datum(s);
    const double h0 = sobolev_norm(u0, 0.5);
    const double l0 = lebesgue_norm(u0, 3.0);
    const Trajectory base = solve(u0, s.horizon, s.solver);
    res.manifest.terminated_reason = to_string(base.terminated_reason);
    write_file_atomic(s.output_dir / "norms.csv", norms_csv(base));
    res.manifest.artifacts.push_back("norms.csv");
    double norm_gap = 0.0;
    double traj_gap = 0.0;
    std::string csv = "lambda,hdot_half_rel_diff,l3_rel_diff,trajectory_l3_diff\n";
    for (double lam : s.scales) {
        if (!(lam > 0.0)) throw DomainError("scaling: scales must be positive");
        const GridSpec gl(s.grid.n_modes(), s.grid.box_length() / lam, s.grid.dealias_fraction());
        Point x0{s.x0[0] / lam, s.x0[1] / lam, s.x0[2] / lam};
        const SpectralField v0 = place_profile(ProfileSpec{s.datum, s.lambda / lam, x0}, gl);
        const double dh = std::abs(sobolev_norm(v0, 0.5) - h0) / std::max(h0, 1e-300);
        const double dl = std::abs(lebesgue_norm(v0, 3.0) - l0) / std::max(l0, 1e-300);
        SolverConfig cfg = s.solver;
        cfg.dt /= lam * lam;
        cfg.min_dt /= lam * lam;
        const Trajectory direct = solve(v0, s.horizon / (lam * lam), cfg);
        const Trajectory mapped = scale_solution(base, lam);
        double gap = 0.0;
        std::size_t shared = 0;
        for (std::size_t j = 0; j < mapped.size(); ++j) {
            const auto k = direct.find_time(mapped.times()[j], 1e-10 * mapped.final_time());
            if (!k) continue;
            ++shared;
            gap = std::max(gap, lebesgue_norm(mapped.snapshots()[j] - direct.snapshots()[*k], 3.0));
        }
        if (shared == 0) throw IncomparableError("scaling: no matched times");
        norm_gap = std::max({norm_gap, dh, dl});
        traj_gap = std::max(traj_gap, gap);
        csv += fmt_real(lam) + "," + fmt_real(dh) + "," + fmt_real(dl) + "," + fmt_real(gap) + "\n";
    }
    write_file_atomic(s.output_dir / "scaling.csv", csv);
    res.manifest.artifacts.push_back("scaling.csv");
    extra["scales"] = s.scales;
    AuditBook book(s);
    if (book.wants("scale_invariance")) book.add("scale_invariance", norm_gap, 1e-6);
    if (book.wants("scaling")) book.add("scaling", traj_gap, 1e-6);
    res.audits = book.take();
}

/// Two-bubble sweep: separation d * L along x at equal scale, or scale ratio rho at a shared core.
inline std::vector<ProfileSpec> bubble_pair(const ScenarioSpec& s, double v) {
    const double L = s.grid.box_length();
    const Point c{0.5 * L, 0.5 * L, 0.5 * L};
    if (s.sweep == "separation") {
        auto wrap = [L](double x) { return x - L * std::floor(x / L); };
        const double d = v * L;
        return {ProfileSpec{s.datum, s.lambda, {wrap(c[0] - 0.5 * d), c[1], c[2]}},
                ProfileSpec{s.datum, s.lambda, {wrap(c[0] + 0.5 * d), c[1], c[2]}}};
    }
    return {ProfileSpec{s.datum, s.lambda, c}, ProfileSpec{s.datum, s.lambda / v, c}};
}

inline std::size_t non_decreasing_steps(const std::vector<double>& v) {
    std::size_t bad = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) ++bad;
    return bad;
}

inline void run_profiles(const ScenarioSpec& s, ScenarioResult& res, nlohmann::ordered_json& extra) {
    std::vector<double> defects;
    std::vector<double> inner;
    std::string csv = std::string(s.sweep) + ",pythagorean_defect,inner_product\n";
    for (double v : s.sweep_values) {
        const auto pair = bubble_pair(s, v);
        defects.push_back(pythagorean_defect(pair, nullptr, s.grid));
        inner.push_back(std::abs(inner_product_orthogonality(pair[0], pair[1], s.grid)));
        csv += fmt_real(v) + "," + fmt_real(defects.back()) + "," + fmt_real(inner.back()) + "\n";
    }
    write_file_atomic(s.output_dir / "sweep.csv", csv);
    res.manifest.artifacts.push_back("sweep.csv");
    extra["sweep"] = s.sweep;
    AuditBook book(s);
    if (book.wants("pythagorean_monotone")) book.add("pythagorean_monotone", double(non_decreasing_steps(defects)), 0.0);
    if (book.wants("orthogonality_monotone")) book.add("orthogonality_monotone", double(non_decreasing_steps(inner)), 0.0);
    if (book.wants("pythagorean_final")) book.add("pythagorean_final", defects.empty() ? 0.0 : defects.back(), 0.05);
    res.audits = book.take();
}

inline nlohmann::ordered_json audits_json(const ScenarioSpec& s, const ScenarioResult& r) {
    nlohmann::ordered_json j;
    j["scenario"] = s.name;
    j["pass"] = r.pass();
    auto& arr = j["audits"] = nlohmann::ordered_json::array();
    for (const auto& a : r.audits) {
        arr.push_back({{"name", a.name}, {"value", a.value}, {"tolerance", a.tolerance}, {"pass", a.pass}});
    }
    if (r.infrastructure_error) j["error"] = r.error;
    return j;
}

} // namespace detail

/// Solves (or sweeps), audits and persists one scenario. Failures are captured in the result, never thrown.
inline ScenarioResult run_scenario(const ScenarioSpec& s) {
    ScenarioResult res;
    res.manifest.scenario = s.name;
    res.manifest.config_hash = config_hash(s);
    res.manifest.start_wall = detail::utc_now();
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();
    try {
        s.validate();
        std::filesystem::create_directories(s.output_dir);
        switch (s.kind) {
        case ScenarioKind::simulate: detail::run_simulate(s, res, extra); break;
        case ScenarioKind::scaling: detail::run_scaling(s, res, extra); break;
        case ScenarioKind::profiles: detail::run_profiles(s, res, extra); break;
        }
    } catch (const std::exception& e) {
        res.infrastructure_error = true;
        res.error = e.what();
        emit_diagnostic("scenario_error", s.name + ": " + e.what());
    }
    res.manifest.end_wall = detail::utc_now();
    try {
        std::filesystem::create_directories(s.output_dir);
        write_file_atomic(s.output_dir / "audits.json", detail::audits_json(s, res).dump(2) + "\n");
        nlohmann::ordered_json timing{{"start", res.manifest.start_wall}, {"end", res.manifest.end_wall}};
        write_file_atomic(s.output_dir / "timing.json", timing.dump(2) + "\n");
        res.manifest.artifacts.push_back("audits.json");
        nlohmann::ordered_json m;
        m["scenario"] = s.name;
        m["kind"] = to_string(s.kind);
        m["config_hash"] = res.manifest.config_hash;
        m["tool_version"] = res.manifest.tool_version;
        m["terminated_reason"] = res.manifest.terminated_reason;
        m["artifacts"] = res.manifest.artifacts;
        m["timing"] = "timing.json";
        m["pass"] = res.pass();
        m["details"] = extra;
        write_file_atomic(s.output_dir / "manifest.json", m.dump(2) + "\n");
    } catch (const std::exception& e) {
        res.infrastructure_error = true;
        res.error = e.what();
    }
    return res;
}

struct SuiteSummary {
    std::vector<ScenarioResult> results;
    std::string error; ///< set when summary.json could not be written

    /// 0 all audits pass, 1 some audit failed, 2 infrastructure error.
    int exit_code() const {
        if (!error.empty()) return 2;
        bool fail = false;
        for (const auto& r : results) {
            if (r.infrastructure_error) return 2;
            fail = fail || !r.pass();
        }
        return fail ? 1 : 0;
    }
};

/// Worker count: explicit value if positive, else CRITNS_THREADS, else 1.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("CRITNS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min<long>(v, 256));
        emit_diagnostic("bad_env", std::string("ignoring CRITNS_THREADS='") + env + "'");
    }
    return 1;
}

/// Runs scenarios on a bounded worker pool; results keep the suite order. Writes summary.json to the suite output.
inline SuiteSummary run_suite(const SuiteSpec& suite, int threads = 0) {
    SuiteSummary sum;
    sum.results.resize(suite.scenarios.size());
    const int workers = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(suite.scenarios.size())));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < suite.scenarios.size();) sum.results[i] = run_scenario(suite.scenarios[i]);
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    nlohmann::ordered_json j;
    j["tool_version"] = tool_version;
    j["scenarios"] = nlohmann::ordered_json::array();
    std::map<std::string, std::pair<int, int>> per_audit;
    for (std::size_t i = 0; i < sum.results.size(); ++i) {
        const auto& r = sum.results[i];
        j["scenarios"].push_back({{"name", suite.scenarios[i].name},
                                  {"pass", r.pass()},
                                  {"infrastructure_error", r.infrastructure_error}});
        for (const auto& a : r.audits) {
            auto& c = per_audit[a.name];
            (a.pass ? c.first : c.second) += 1;
        }
    }
    auto& pa = j["audits"] = nlohmann::ordered_json::object();
    for (const auto& [name, c] : per_audit) pa[name] = {{"pass", c.first}, {"fail", c.second}};
    j["exit_code"] = sum.exit_code();
    try {
        std::filesystem::create_directories(suite.output_dir);
        write_file_atomic(suite.output_dir / "summary.json", j.dump(2) + "\n");
    } catch (const std::exception& e) {
        sum.error = e.what();
        emit_diagnostic("summary_error", e.what());
    }
    return sum;
}

inline SuiteSummary run_suite(const std::filesystem::path& config, const SuiteOverrides& ov = {}, int threads = 0) {
    return run_suite(load_suite(config, ov), threads);
}

} // namespace critns
