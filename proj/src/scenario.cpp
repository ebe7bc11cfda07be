#include "thomlab/scenario.hpp"

#include "thomlab/asymptotics.hpp"
#include "thomlab/flow.hpp"
#include "thomlab/io.hpp"
#include "thomlab/pde_spectral.hpp"
#include "thomlab/reduction.hpp"
#include "thomlab/sphere_critical.hpp"
#include "thomlab/svg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "toml.hpp"

namespace fs = std::filesystem;

namespace thomlab {

namespace {

const std::set<std::string> kKinds{"gradient", "heavyball", "pde", "reduce", "analyze", "sweep"};
const std::set<std::string> kAnalyses{"fit_rate", "classify", "secant", "gstar", "a1a2", "exponents", "critical_points", "mz"};

// Typed access with file:line diagnostics.
class Fields {
public:
    Fields(const toml::table& root, std::string file) : root_(root), file_(std::move(file)) {}

    const toml::node* node(std::string_view dotted) const { return root_.at_path(dotted).node(); }
    bool has(std::string_view dotted) const { return node(dotted) != nullptr; }

    [[noreturn]] void fail(std::string_view dotted, const std::string& msg) const {
        const toml::node* n = node(dotted);
        std::string where = file_;
        if (n && n->source().begin.line > 0) {
            where += ":" + std::to_string(n->source().begin.line) + ":" + std::to_string(n->source().begin.column);
        }
        throw Error(ErrorKind::ConfigError, where + ": field '" + std::string(dotted) + "': " + msg);
    }

    double num(std::string_view k, std::optional<double> def = std::nullopt) const {
        const toml::node* n = node(k);
        if (!n) {
            if (def) return *def;
            fail(k, "required number is missing");
        }
        if (auto v = n->value<double>()) return *v;
        fail(k, "expected a number");
    }
    long integer(std::string_view k, std::optional<long> def = std::nullopt) const {
        const toml::node* n = node(k);
        if (!n) {
            if (def) return *def;
            fail(k, "required integer is missing");
        }
        if (auto v = n->value<int64_t>()) return static_cast<long>(*v);
        if (auto d = n->value<double>(); d && std::floor(*d) == *d) return static_cast<long>(*d);
        fail(k, "expected an integer");
    }
    std::string str(std::string_view k, std::optional<std::string> def = std::nullopt) const {
        const toml::node* n = node(k);
        if (!n) {
            if (def) return *def;
            fail(k, "required string is missing");
        }
        if (auto v = n->value<std::string>()) return *v;
        fail(k, "expected a string");
    }
    bool boolean(std::string_view k, bool def) const {
        const toml::node* n = node(k);
        if (!n) return def;
        if (auto v = n->value<bool>()) return *v;
        fail(k, "expected true or false");
    }
    std::vector<double> nums(std::string_view k, std::optional<std::vector<double>> def = std::nullopt) const {
        const toml::node* n = node(k);
        if (!n) {
            if (def) return *def;
            fail(k, "required array is missing");
        }
        const toml::array* a = n->as_array();
        if (!a) fail(k, "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : *a) {
            auto v = e.value<double>();
            if (!v) fail(k, "expected an array of numbers");
            out.push_back(*v);
        }
        return out;
    }
    std::vector<std::string> strs(std::string_view k) const {
        const toml::node* n = node(k);
        if (!n) return {};
        const toml::array* a = n->as_array();
        if (!a) fail(k, "expected an array of strings");
        std::vector<std::string> out;
        for (const auto& e : *a) {
            auto v = e.value<std::string>();
            if (!v) fail(k, "expected an array of strings");
            out.push_back(*v);
        }
        return out;
    }
    Vec vec(std::string_view k, std::optional<Vec> def = std::nullopt) const {
        if (!has(k) && def) return *def;
        const auto v = nums(k);
        return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    const std::string& file() const { return file_; }

private:
    const toml::table& root_;
    std::string file_;
};

std::optional<Rational> parse_rational(const std::string& s) {
    const auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rational{std::stol(s), 1};
        return Rational{std::stol(s.substr(0, slash)), std::stol(s.substr(slash + 1))};
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

nlohmann::json toml_to_json(const toml::node& n) {
    if (auto t = n.as_table()) {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
        return j;
    }
    if (auto a = n.as_array()) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& v : *a) j.push_back(toml_to_json(v));
        return j;
    }
    if (auto v = n.value<int64_t>(); v && n.is_integer()) return *v;
    if (auto v = n.value<double>()) return *v;
    if (auto v = n.value<bool>()) return *v;
    if (auto v = n.value<std::string>()) return *v;
    return nullptr;
}

void json_into_toml(toml::table& t, const std::string& key, const nlohmann::json& v) {
    if (v.is_boolean()) {
        t.insert_or_assign(key, v.get<bool>());
    } else if (v.is_number_integer()) {
        t.insert_or_assign(key, v.get<int64_t>());
    } else if (v.is_number()) {
        t.insert_or_assign(key, v.get<double>());
    } else if (v.is_string()) {
        t.insert_or_assign(key, v.get<std::string>());
    } else if (v.is_array()) {
        toml::array a;
        for (const auto& e : v) {
            if (e.is_number_integer()) a.push_back(e.get<int64_t>());
            else if (e.is_number()) a.push_back(e.get<double>());
            else if (e.is_string()) a.push_back(e.get<std::string>());
            else if (e.is_boolean()) a.push_back(e.get<bool>());
            else throw Error(ErrorKind::ConfigError, "override '" + key + "': nested arrays are not supported");
        }
        t.insert_or_assign(key, std::move(a));
    } else {
        throw Error(ErrorKind::ConfigError, "override '" + key + "': unsupported value type");
    }
}

const nlohmann::json* lookup(const nlohmann::json& j, const std::string& dotted) {
    const nlohmann::json* cur = &j;
    std::istringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (cur->is_object()) {
            auto it = cur->find(part);
            if (it == cur->end()) return nullptr;
            cur = &*it;
        } else if (cur->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(part);
            } catch (const std::exception&) {
                return nullptr;
            }
            if (idx >= cur->size()) return nullptr;
            cur = &(*cur)[idx];
        } else {
            return nullptr;
        }
    }
    return cur;
}

std::string cell(const nlohmann::json* v) {
    if (!v || v->is_null()) return "";
    if (v->is_number()) return format_double(v->get<double>());
    if (v->is_string()) return v->get<std::string>();
    if (v->is_array()) {
        std::string s;
        for (std::size_t i = 0; i < v->size(); ++i) s += (i ? ";" : "") + cell(&(*v)[i]);
        return s;
    }
    return v->dump();
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

} // namespace

int exit_code_for(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::ConfigError:
    case ErrorKind::IoError: return 2;
    default: return 3;
    }
}

int default_workers() {
    if (const char* env = std::getenv("THOMLAB_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w > 0) return w;
        } catch (const std::exception&) {
        }
    }
    return 1;
}

std::vector<CheckResult> evaluate_checks(const std::vector<CheckSpec>& specs, const nlohmann::json& results) {
    std::vector<CheckResult> out;
    for (const auto& s : specs) {
        CheckResult r;
        r.spec = s;
        const nlohmann::json* v = lookup(results, s.metric);
        if (!v) {
            r.detail = "metric not found in results";
            out.push_back(r);
            continue;
        }
        r.actual = *v;
        r.pass = true;
        std::ostringstream d;
        if (s.equals) {
            const std::string got = v->is_string() ? v->get<std::string>() : cell(v);
            if (got != *s.equals) {
                r.pass = false;
                d << "expected '" << *s.equals << "', got '" << got << "'. ";
            }
        }
        if (s.approx || s.min || s.max) {
            if (!v->is_number()) {
                r.pass = false;
                d << "value is not numeric. ";
            } else {
                const double x = v->get<double>();
                if (s.approx) {
                    const double tol = std::max(s.abs_tol, s.rel_tol * std::abs(*s.approx));
                    if (!(std::abs(x - *s.approx) <= tol)) {
                        r.pass = false;
                        d << "|" << format_double(x) << " - " << format_double(*s.approx) << "| > " << format_double(tol) << ". ";
                    }
                }
                if (s.min && !(x >= *s.min)) {
                    r.pass = false;
                    d << format_double(x) << " < min " << format_double(*s.min) << ". ";
                }
                if (s.max && !(x <= *s.max)) {
                    r.pass = false;
                    d << format_double(x) << " > max " << format_double(*s.max) << ". ";
                }
            }
        }
        r.detail = d.str();
        out.push_back(r);
    }
    return out;
}

struct Scenario::Impl {
    toml::table root;
    std::string file;
    std::string base_dir;

    Fields fields() const { return Fields(root, file); }
    fs::path resolve(const std::string& p) const { return fs::path(p).is_absolute() ? fs::path(p) : fs::path(base_dir) / p; }

    std::string kind() const { return fields().str("kind"); }

    Potential potential(const std::string& prefix) const;
    std::vector<std::string> analyses() const;
    void validate() const;

    void run_trajectory(const Trajectory& tr, const std::optional<Potential>& g, const fs::path& out,
                        const Provenance& prov, ScenarioResult& res) const;
    void run_gradient(const fs::path& out, const Provenance& prov, ScenarioResult& res) const;
    void run_heavyball(const fs::path& out, const Provenance& prov, ScenarioResult& res) const;
    void run_pde(const fs::path& out, const Provenance& prov, ScenarioResult& res) const;
    void run_reduce(const fs::path& out, const Provenance& prov, ScenarioResult& res) const;
    void run_analyze(const fs::path& out, const Provenance& prov, ScenarioResult& res) const;
    void run_sweep(const fs::path& out, const Provenance& prov, int workers, ScenarioResult& res) const;
    FlowOptions flow_options() const;
};

Potential Scenario::Impl::potential(const std::string& prefix) const {
    const Fields f = fields();
    const int sources = f.has(prefix + ".builtin") + f.has(prefix + ".file") + f.has(prefix + ".terms");
    if (sources != 1) f.fail(prefix, "exactly one of builtin, file, terms is required");
    Potential p(1, {});
    if (f.has(prefix + ".builtin")) {
        const std::string b = f.str(prefix + ".builtin");
        if (b == "bubble_sheet") {
            p = Potential::bubble_sheet();
        } else if (b == "norm_power") {
            p = Potential::norm_power(static_cast<int>(f.integer(prefix + ".n")), static_cast<int>(f.integer(prefix + ".k")),
                                      f.num(prefix + ".c", 1.0));
        } else if (b == "diagonal_quadratic") {
            p = Potential::diagonal_quadratic(f.nums(prefix + ".lambda"));
        } else {
            f.fail(prefix + ".builtin", "unknown builtin '" + b + "' (bubble_sheet, norm_power, diagonal_quadratic)");
        }
    } else if (f.has(prefix + ".file")) {
        const fs::path path = resolve(f.str(prefix + ".file"));
        if (!fs::exists(path)) f.fail(prefix + ".file", "potential file '" + path.string() + "' does not exist");
        try {
            p = Potential::load(path.string());
        } catch (const Error& e) {
            f.fail(prefix + ".file", e.what());
        }
    } else {
        const long n = f.integer(prefix + ".n");
        const toml::array* arr = f.node(prefix + ".terms")->as_array();
        if (!arr) f.fail(prefix + ".terms", "expected an array of {exps, coef} tables");
        std::vector<Term> ts;
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const std::string key = prefix + ".terms[" + std::to_string(i) + "]";
            std::vector<int> e;
            for (double x : f.nums(key + ".exps")) e.push_back(static_cast<int>(x));
            ts.push_back(Term{e, f.num(key + ".coef")});
        }
        try {
            p = Potential(static_cast<int>(n), ts, f.str(prefix + ".label", "inline"));
        } catch (const Error& e) {
            f.fail(prefix + ".terms", e.what());
        }
    }
    const double scale = f.num(prefix + ".scale", 1.0);
    return scale == 1.0 ? p : p.scaled(scale);
}

std::vector<std::string> Scenario::Impl::analyses() const {
    const Fields f = fields();
    auto list = f.strs("analysis.run");
    for (const auto& a : list) {
        if (!kAnalyses.count(a)) f.fail("analysis.run", "unknown analysis '" + a + "'");
    }
    return list;
}

FlowOptions Scenario::Impl::flow_options() const {
    const Fields f = fields();
    FlowOptions o;
    o.ode.rtol = f.num("integration.rtol", o.ode.rtol);
    o.ode.atol = f.num("integration.atol", o.ode.atol);
    o.ode.samples_per_decade = static_cast<int>(f.integer("integration.samples_per_decade", o.ode.samples_per_decade));
    o.ode.uniform_dt = f.num("integration.uniform_dt", 0.0);
    o.validity_radius = f.num("integration.validity_radius", o.validity_radius);
    o.blowup_factor = f.num("integration.blowup_factor", o.blowup_factor);
    return o;
}

void Scenario::Impl::validate() const {
    const Fields f = fields();
    const std::string k = f.str("kind");
    if (!kKinds.count(k)) f.fail("kind", "unknown kind '" + k + "' (gradient, heavyball, pde, reduce, analyze, sweep)");
    analyses();
    if (k == "gradient" || k == "heavyball") {
        const Potential p = potential("potential");
        const Vec y0 = f.vec("initial.y0");
        if (y0.size() != p.dimension()) f.fail("initial.y0", "length does not match the potential dimension");
        if (k == "heavyball") {
            f.num("heavyball.m");
            if (f.has("initial.v0") && f.vec("initial.v0").size() != y0.size()) f.fail("initial.v0", "length mismatch");
        }
        if (!(f.num("integration.t_end") > f.num("integration.t0", 0.0))) f.fail("integration.t_end", "must exceed t0");
        if (f.has("error_model")) {
            const std::string em = f.str("error_model.kind", "none");
            if (em != "none" && em != "synthetic_a2") f.fail("error_model.kind", "expected none or synthetic_a2");
        }
    } else if (k == "pde") {
        PdeModel::from_name(f.str("pde.model", "cubic"));
        scheme_from_name(f.str("pde.scheme", "etdrk4"));
        if (f.integer("pde.K", 64) < 1) f.fail("pde.K", "must be positive");
        if (!(f.num("pde.dt", 1e-3) > 0)) f.fail("pde.dt", "must be positive");
        if (!(f.num("pde.t_end") > 0)) f.fail("pde.t_end", "must be positive");
    } else if (k == "reduce") {
        PdeModel::from_name(f.str("reduce.model", "cubic"));
    } else if (k == "analyze") {
        const fs::path p = resolve(f.str("input.trajectory"));
        if (!fs::exists(p)) f.fail("input.trajectory", "trajectory file '" + p.string() + "' does not exist");
        if (f.has("potential")) potential("potential");
    } else if (k == "sweep") {
        const fs::path base = resolve(f.str("sweep.base"));
        if (!fs::exists(base)) f.fail("sweep.base", "base scenario '" + base.string() + "' does not exist");
        const toml::node* g = f.node("sweep.grid");
        if (g && !g->as_table()) f.fail("sweep.grid", "expected a table of parameter = [values]");
        if (g) {
            for (const auto& [key, val] : *g->as_table()) {
                if (!val.as_array()) f.fail("sweep.grid", "entry '" + std::string(key.str()) + "' must be an array");
            }
        }
    }
    if (const toml::node* c = f.node("checks")) {
        const toml::array* a = c->as_array();
        if (!a) f.fail("checks", "expected [[checks]] tables");
        for (std::size_t i = 0; i < a->size(); ++i) f.str("checks[" + std::to_string(i) + "].metric");
    }
}

namespace {

PlotSeries series(std::string label, std::vector<double> x, std::vector<double> y) {
    return {std::move(label), std::move(x), std::move(y)};
}

void plot(const fs::path& path, const std::vector<PlotSeries>& s, PlotSpec spec, const Provenance& prov,
          ScenarioResult& res) {
    spec.note = prov.comment_line().substr(2);
    write_text(path.string(), render_svg(s, spec));
    res.artifacts.push_back(path.string());
}

template <class F>
void guarded(const std::string& name, nlohmann::json& results, bool& failed, F&& f) {
    try {
        results[name] = f();
    } catch (const Error& e) {
        results[name] = {{"error", e.what()}, {"kind", to_string(e.kind())}};
        failed = true;
    }
}

} // namespace

void Scenario::Impl::run_trajectory(const Trajectory& tr, const std::optional<Potential>& g, const fs::path& out,
                                    const Provenance& prov, ScenarioResult& res) const {
    const Fields f = fields();
    FitRateOptions fo;
    fo.decades = f.num("analysis.decades", fo.decades);
    fo.snap_tol = f.num("analysis.snap_tol", fo.snap_tol);
    for (const auto& c : f.strs("analysis.candidates")) {
        const auto r = parse_rational(c);
        if (!r) f.fail("analysis.candidates", "cannot parse rational '" + c + "'");
        fo.candidates.push_back(*r);
    }
    bool failed = false;
    auto& R = res.results;
    std::optional<RateFit> rate;
    std::optional<SecantReport> sec;
    for (const auto& a : analyses()) {
        const bool needs_g = a == "gstar" || a == "a1a2" || a == "exponents" || a == "critical_points";
        if (needs_g && !g) f.fail("analysis.run", "analysis '" + a + "' needs a [potential] table");
        if (a == "fit_rate") {
            guarded(a, R, failed, [&] {
                rate = fit_rate(tr, fo);
                return rate->to_json();
            });
        } else if (a == "classify") {
            guarded(a, R, failed, [&] { return classify_decay(tr, nullptr, fo).to_json(); });
        } else if (a == "secant") {
            guarded(a, R, failed, [&] {
                std::optional<Potential> lead;
                if (g) lead = g->leading_part();
                sec = secant_analysis(tr, lead ? &*lead : nullptr, f.num("analysis.secant_tol", 1e-3));
                return sec->to_json();
            });
        } else if (a == "gstar") {
            guarded(a, R, failed, [&] {
                const double ell = rate ? rate->ell_star : f.num("analysis.ell_star");
                const auto alpha = rate ? std::optional<double>(rate->alpha0) : std::nullopt;
                const auto rep = monitor_gstar(tr, *g, ell, f.num("analysis.omega", 0.1), alpha);
                plot(out / "gstar.svg", {series("G*", rep.t, rep.gstar)}, {"normalized value G*", "t", "G*", true, false, ""}, prov, res);
                return rep.to_json();
            });
        } else if (a == "a1a2") {
            guarded(a, R, failed, [&] {
                return verify_A1_A2(tr, *g, f.num("analysis.a1a2_rho", 0.75), static_cast<int>(f.integer("analysis.a1a2_N", 8)))
                    .to_json();
            });
        } else if (a == "exponents") {
            guarded(a, R, failed, [&] {
                ExponentSampling s;
                s.r = f.num("analysis.exponents_r", s.r);
                s.epsilon = f.num("analysis.exponents_epsilon", s.epsilon);
                s.n_samples = static_cast<int>(f.integer("analysis.exponents_samples", s.n_samples));
                s.omega = f.num("analysis.omega", s.omega);
                s.seed = prov.seed;
                return characteristic_exponents(*g, s).to_json();
            });
        } else if (a == "critical_points") {
            guarded(a, R, failed, [&] {
                CriticalSearchOptions co;
                co.seed = prov.seed;
                co.n_starts = static_cast<int>(f.integer("analysis.critical_starts", co.n_starts));
                return to_json(critical_points(g->leading_part(), co));
            });
        } else if (a == "mz") {
            f.fail("analysis.run", "mz applies to pde scenarios");
        }
    }
    if (failed) res.exit_code = 3;

    std::vector<double> t, nrm, ang;
    const Vec last = tr.y.back().norm() > 0 ? Vec(tr.y.back().normalized()) : tr.y.back();
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double r = tr.y[i].norm();
        if (r == 0) continue;
        t.push_back(tr.t[i]);
        nrm.push_back(r);
        ang.push_back(2.0 * std::asin(std::min(1.0, 0.5 * (tr.y[i] / r - last).norm())));
    }
    plot(out / "norm_decay.svg", {series("|y|", t, nrm)}, {"norm decay", "t", "|y(t)|", true, true, ""}, prov, res);
    plot(out / "secant_angle.svg", {series("angle to final secant", t, ang)}, {"secant angle", "t", "radians", true, true, ""},
         prov, res);
}

void Scenario::Impl::run_gradient(const fs::path& out, const Provenance& prov, ScenarioResult& res) const {
    const Fields f = fields();
    const Potential g = potential("potential");
    ErrorModel em;
    if (f.str("error_model.kind", "none") == "synthetic_a2") {
        em = ErrorModel::synthetic_a2(f.num("error_model.rho", 0.75), static_cast<int>(f.integer("error_model.N", 8)),
                                      f.num("error_model.bN", 1.0), f.num("error_model.theta", 1.0), prov.seed);
    }
    const Trajectory tr = integrate_gradient(g, f.vec("initial.y0"), f.num("integration.t0", 0.0),
                                             f.num("integration.t_end"), flow_options(), em);
    write_trajectory_csv((out / "trajectory.csv").string(), tr, &g, prov);
    write_json((out / "trajectory.json").string(), tr.meta, prov);
    res.artifacts.push_back((out / "trajectory.csv").string());
    res.results["run"] = {{"samples", tr.size()}, {"t_end", tr.t.back()}, {"final_norm", tr.y.back().norm()}};
    run_trajectory(tr, g, out, prov, res);
}

void Scenario::Impl::run_heavyball(const fs::path& out, const Provenance& prov, ScenarioResult& res) const {
    const Fields f = fields();
    const Potential fp = potential("potential");
    const double m = f.num("heavyball.m");
    const Vec y0 = f.vec("initial.y0");
    const Vec v0 = f.vec("initial.v0", Vec::Zero(y0.size()));
    const Trajectory tr = integrate_heavy_ball(fp, m, y0, v0, f.num("integration.t0", 0.0), f.num("integration.t_end"),
                                               flow_options());
    write_trajectory_csv((out / "trajectory.csv").string(), tr, &fp, prov);
    write_json((out / "trajectory.json").string(), tr.meta, prov);
    res.artifacts.push_back((out / "trajectory.csv").string());
    res.results["run"] = {{"samples", tr.size()}, {"m", m}, {"final_norm", tr.y.back().norm()}};
    // Overdamped limit: gradient flow of f/m, which is the potential the analyses see.
    run_trajectory(tr, fp.scaled(1.0 / m), out, prov, res);
}

void Scenario::Impl::run_pde(const fs::path& out, const Provenance& prov, ScenarioResult& res) const {
    const Fields f = fields();
    const PdeModel model = PdeModel::from_name(f.str("pde.model", "cubic"));
    PdeOptions o;
    o.K = static_cast<int>(f.integer("pde.K", o.K));
    o.dt = f.num("pde.dt", o.dt);
    o.grow_dt = f.boolean("pde.grow_dt", o.grow_dt);
    o.scheme = scheme_from_name(f.str("pde.scheme", "etdrk4"));
    o.t_end = f.num("pde.t_end");
    o.sample_dt = f.num("pde.sample_dt", 0.0);
    o.samples_per_decade = static_cast<int>(f.integer("pde.samples_per_decade", o.samples_per_decade));
    o.validity_radius = f.num("pde.validity_radius", o.validity_radius);
    o.symmetry_closure = f.boolean("pde.symmetry_closure", o.symmetry_closure);

    PdeRun run;
    if (f.has("pde.modes")) {
        // Initial data as rows [k, Re c_k, Im c_k].
        SpectralState init(o.K);
        const toml::array* rows = f.node("pde.modes")->as_array();
        if (!rows) f.fail("pde.modes", "expected an array of [k, re, im]");
        for (std::size_t i = 0; i < rows->size(); ++i) {
            const auto r = f.nums("pde.modes[" + std::to_string(i) + "]");
            if (r.size() != 3 || r[0] < 0 || r[0] > o.K) f.fail("pde.modes", "row must be [k, re, im] with 0 <= k <= K");
            init.c[static_cast<int>(r[0])] = {r[1], r[0] == 0 ? 0.0 : r[2]};
        }
        run = evolve(init, model, o);
        res.results["run"] = {{"status", to_string(run.status)}, {"final_norm", run.norm.back()}};
    } else {
        const auto rep = slow_decay_report(f.num("pde.amplitude"), f.num("pde.theta0", 0.0), model, o);
        run = rep.run;
        res.results["run"] = rep.to_json();
    }
    res.results["run"]["meta"] = run.meta;
    write_pde_series_csv((out / "series.csv").string(), run, prov);
    write_snapshot_csv((out / "snapshot.csv").string(), run.final_state, prov);
    res.artifacts.push_back((out / "series.csv").string());
    res.artifacts.push_back((out / "snapshot.csv").string());

    FitRateOptions fo;
    fo.decades = f.num("analysis.decades", fo.decades);
    bool failed = false;
    std::optional<RateFit> rate;
    for (const auto& a : analyses()) {
        if (a == "fit_rate") {
            guarded(a, res.results, failed, [&] {
                rate = fit_rate(run.neutral(), fo);
                return rate->to_json();
            });
        } else if (a == "classify") {
            guarded(a, res.results, failed, [&] { return classify_decay(run.modes(), nullptr, fo).to_json(); });
        } else if (a == "secant") {
            guarded(a, res.results, failed, [&] {
                return secant_analysis(run.neutral(), nullptr, f.num("analysis.secant_tol", 1e-3)).to_json();
            });
        } else if (a == "mz") {
            guarded(a, res.results, failed, [&] {
                return mz_trichotomy(run.t, run.Xplus, run.Xzero, run.Xminus, f.num("analysis.mz_b", 3.0),
                                     f.num("analysis.mz_threshold", 0.05))
                    .to_json();
            });
        } else {
            f.fail("analysis.run", "analysis '" + a + "' does not apply to pde scenarios");
        }
    }
    if (failed) res.exit_code = 3;

    std::vector<double> t, n, st, xp, x0, xm;
    for (std::size_t i = 0; i < run.t.size(); ++i) {
        if (run.t[i] <= 0) continue;
        t.push_back(run.t[i]);
        n.push_back(run.norm[i]);
        st.push_back(std::sqrt(run.t[i]) * run.norm[i]);
        xp.push_back(run.Xplus[i]);
        x0.push_back(run.Xzero[i]);
        xm.push_back(run.Xminus[i]);
    }
    plot(out / "norm_decay.svg", {series("||u||", t, n)}, {"L2 norm decay", "t", "||u(t)||", true, true, ""}, prov, res);
    plot(out / "sqrt_t_norm.svg", {series("sqrt(t) ||u||", t, st)}, {"rescaled norm", "t", "sqrt(t) ||u(t)||", true, false, ""},
         prov, res);
    plot(out / "mode_amplitudes.svg", {series("X+ (k=0)", t, xp), series("X0 (k=1)", t, x0), series("X- (k>=2)", t, xm)},
         {"grouped mode amplitudes", "t", "amplitude", true, true, ""}, prov, res);
}

void Scenario::Impl::run_reduce(const fs::path& out, const Provenance& prov, ScenarioResult& res) const {
    const Fields f = fields();
    ReductionSettings s;
    s.K = static_cast<int>(f.integer("reduce.K", s.K));
    s.rho = f.num("reduce.trust_radius", s.rho);
    const ReducedModel rm(PdeModel::from_name(f.str("reduce.model", "cubic")), s);
    const auto fit = fit_reduced_polynomial(rm, f.nums("reduce.radii", std::vector<double>{0.02, 0.04, 0.08}),
                                            static_cast<int>(f.integer("reduce.directions", 32)),
                                            static_cast<int>(f.integer("reduce.max_degree", 7)));
    const auto as = adams_simon_from_reduction(fit);
    nlohmann::json j = fit.to_json();
    j["trust_radius"] = s.rho;
    j["model"] = rm.model().name;
    j["adams_simon"] = {{"verdict", to_string(as.verdict)}, {"best_value", as.best_value}, {"diagnostic", as.diagnostic}};
    if (fit.p) j["leading_value_e1"] = fit.f_p.eval(Vec::Unit(2, 0));
    res.results["reduce"] = j;
    write_json((out / "reduced.json").string(), j, prov);
    res.artifacts.push_back((out / "reduced.json").string());
}

void Scenario::Impl::run_analyze(const fs::path& out, const Provenance& prov, ScenarioResult& res) const {
    const Fields f = fields();
    const Trajectory tr = read_trajectory_csv(resolve(f.str("input.trajectory")).string());
    std::optional<Potential> g;
    if (f.has("potential")) g = potential("potential");
    res.results["run"] = {{"samples", tr.size()}, {"source", f.str("input.trajectory")}};
    run_trajectory(tr, g, out, prov, res);
}

void Scenario::Impl::run_sweep(const fs::path& out, const Provenance& prov, int workers, ScenarioResult& res) const {
    const Fields f = fields();
    const Scenario base = Scenario::load(resolve(f.str("sweep.base")).string());
    if (base.kind() == "sweep") f.fail("sweep.base", "a sweep cannot sweep another sweep");

    // Cartesian product in sorted key order; the last key varies fastest.
    std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
    if (const toml::node* g = f.node("sweep.grid")) {
        for (const auto& [k, v] : *g->as_table()) {
            std::vector<nlohmann::json> vals;
            for (const auto& e : *v.as_array()) vals.push_back(toml_to_json(e));
            axes.emplace_back(std::string(k.str()), std::move(vals));
        }
    }
    std::vector<std::vector<nlohmann::json>> points;
    if (!axes.empty()) {
        points.push_back({});
        for (const auto& [k, vals] : axes) {
            std::vector<std::vector<nlohmann::json>> next;
            for (const auto& p : points) {
                for (const auto& v : vals) {
                    auto q = p;
                    q.push_back(v);
                    next.push_back(std::move(q));
                }
            }
            points = std::move(next);
        }
    }

    std::vector<ScenarioResult> rows(points.size());
    std::vector<std::string> errors(points.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            try {
                Scenario sc = base;
                for (std::size_t a = 0; a < axes.size(); ++a) sc = sc.with_override(axes[a].first, points[i][a]);
                // Checks in the base describe its own parameters, not the swept ones.
                sc.impl_->root.erase("checks");
                char dir[32];
                std::snprintf(dir, sizeof dir, "run_%04zu", i);
                rows[i] = sc.run((out / "runs" / dir).string());
            } catch (const Error& e) {
                rows[i].exit_code = exit_code_for(e);
                rows[i].error = e.what();
            }
        }
    };
    const int nw = std::max(1, std::min<int>(workers, static_cast<int>(points.size())));
    std::vector<std::jthread> pool;
    for (int w = 1; w < nw; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();

    std::ostringstream csv;
    csv << prov.comment_line() << "\nindex";
    for (const auto& [k, v] : axes) csv << ',' << csv_quote(k);
    csv << ",exit_code,ell_star,alpha0,direction,class,error\n";
    nlohmann::json table = nlohmann::json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& r = rows[i].results;
        const nlohmann::json* dir = lookup(r, "secant.theta_star");
        if (!dir || dir->is_null()) dir = lookup(r, "classify.direction");
        std::string err = rows[i].error;
        if (err.empty()) {
            for (const char* a : {"fit_rate", "classify", "secant"}) {
                if (const auto* e = lookup(r, std::string(a) + ".error")) err += std::string(a) + ": " + e->get<std::string>() + " ";
            }
        }
        csv << i;
        for (const auto& v : points[i]) csv << ',' << csv_quote(cell(&v));
        csv << ',' << rows[i].exit_code << ',' << cell(lookup(r, "fit_rate.ell_star")) << ','
            << cell(lookup(r, "fit_rate.alpha0")) << ',' << csv_quote(cell(dir)) << ',' << cell(lookup(r, "classify.variant"))
            << ',' << csv_quote(err) << '\n';
        table.push_back({{"index", i}, {"exit_code", rows[i].exit_code}, {"results", r}});
    }
    write_text((out / "sweep.csv").string(), csv.str());
    res.artifacts.push_back((out / "sweep.csv").string());
    res.results["sweep"] = {{"runs", points.size()}, {"rows", table}};
}

Scenario::Scenario(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Scenario::~Scenario() = default;
Scenario::Scenario(const Scenario& o) : impl_(std::make_unique<Impl>(*o.impl_)) {}
Scenario& Scenario::operator=(const Scenario& o) {
    impl_ = std::make_unique<Impl>(*o.impl_);
    return *this;
}
Scenario::Scenario(Scenario&&) noexcept = default;
Scenario& Scenario::operator=(Scenario&&) noexcept = default;

Scenario Scenario::load(const std::string& path) {
    if (!fs::exists(path)) throw Error(ErrorKind::ConfigError, "scenario file '" + path + "' does not exist");
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), fs::path(path).parent_path().string(), path);
}

Scenario Scenario::from_string(const std::string& text, const std::string& base_dir, const std::string& name) {
    auto impl = std::make_unique<Impl>();
    try {
        impl->root = toml::parse(text, name);
    } catch (const toml::parse_error& e) {
        throw Error(ErrorKind::ConfigError, name + ":" + std::to_string(e.source().begin.line) + ":" +
                                                std::to_string(e.source().begin.column) + ": " + std::string(e.description()));
    }
    impl->file = name;
    impl->base_dir = base_dir.empty() ? "." : base_dir;
    Scenario s(std::move(impl));
    s.validate();
    return s;
}

std::string Scenario::kind() const { return impl_->kind(); }

const std::string& Scenario::name() const { return impl_->file; }

std::uint64_t Scenario::seed() const { return static_cast<std::uint64_t>(impl_->fields().integer("seed", 0)); }

std::string Scenario::hash() const {
    std::ostringstream ss;
    ss << impl_->root;
    return fnv1a_hex(ss.str());
}

std::vector<CheckSpec> Scenario::checks() const {
    const Fields f = impl_->fields();
    std::vector<CheckSpec> out;
    const toml::node* c = f.node("checks");
    if (!c) return out;
    for (std::size_t i = 0; i < c->as_array()->size(); ++i) {
        const std::string k = "checks[" + std::to_string(i) + "]";
        CheckSpec s;
        s.metric = f.str(k + ".metric");
        if (f.has(k + ".approx")) s.approx = f.num(k + ".approx");
        s.rel_tol = f.num(k + ".rel_tol", 0.0);
        s.abs_tol = f.num(k + ".abs_tol", 0.0);
        if (f.has(k + ".min")) s.min = f.num(k + ".min");
        if (f.has(k + ".max")) s.max = f.num(k + ".max");
        if (f.has(k + ".equals")) s.equals = f.str(k + ".equals");
        out.push_back(s);
    }
    return out;
}

void Scenario::validate() const { impl_->validate(); }

Scenario Scenario::with_override(const std::string& dotted, const nlohmann::json& value) const {
    Scenario s(*this);
    toml::table* t = &s.impl_->root;
    std::istringstream ss(dotted);
    std::vector<std::string> parts;
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    if (parts.empty()) throw Error(ErrorKind::ConfigError, "empty override key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!t->contains(parts[i])) t->insert(parts[i], toml::table{});
        t = (*t)[parts[i]].as_table();
        if (!t) throw Error(ErrorKind::ConfigError, "override '" + dotted + "': '" + parts[i] + "' is not a table");
    }
    json_into_toml(*t, parts.back(), value);
    s.validate();
    return s;
}

ScenarioResult Scenario::run(const std::string& out_dir, int workers) const {
    ScenarioResult res;
    const fs::path out(out_dir);
    const Provenance prov{hash(), seed()};
    try {
        fs::create_directories(out);
        const std::string k = kind();
        res.results["scenario"] = {{"kind", k}, {"file", name()}};
        if (k == "gradient") impl_->run_gradient(out, prov, res);
        else if (k == "heavyball") impl_->run_heavyball(out, prov, res);
        else if (k == "pde") impl_->run_pde(out, prov, res);
        else if (k == "reduce") impl_->run_reduce(out, prov, res);
        else if (k == "analyze") impl_->run_analyze(out, prov, res);
        else if (k == "sweep") impl_->run_sweep(out, prov, workers, res);
    } catch (const Error& e) {
        res.exit_code = exit_code_for(e);
        res.error = e.what();
        res.results["error"] = {{"message", e.what()}, {"kind", to_string(e.kind())}};
    } catch (const std::filesystem::filesystem_error& e) {
        res.exit_code = 2;
        res.error = e.what();
    }
    res.checks = evaluate_checks(checks(), res.results);
    const bool checks_ok = std::all_of(res.checks.begin(), res.checks.end(), [](const CheckResult& c) { return c.pass; });
    if (res.exit_code == 0 && !checks_ok) res.exit_code = 1;

    nlohmann::json report = res.results;
    nlohmann::json cj = nlohmann::json::array();
    for (const auto& c : res.checks) cj.push_back({{"metric", c.spec.metric}, {"pass", c.pass}, {"actual", c.actual}, {"detail", c.detail}});
    report["checks"] = cj;
    report["exit_code"] = res.exit_code;
    try {
        write_json((out / "analysis.json").string(), report, prov);
        res.artifacts.push_back((out / "analysis.json").string());
    } catch (const Error& e) {
        if (res.exit_code == 0) res.exit_code = 2;
        res.error += std::string(" ") + e.what();
    }
    return res;
}

} // namespace thomlab
