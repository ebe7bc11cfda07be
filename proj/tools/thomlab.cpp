// Command-line front end: scenario runs, sweeps, and direct access to each analysis.
#include "thomlab/asymptotics.hpp"
#include "thomlab/error.hpp"
#include "thomlab/flow.hpp"
#include "thomlab/io.hpp"
#include "thomlab/pde_spectral.hpp"
#include "thomlab/reduction.hpp"
#include "thomlab/scenario.hpp"
#include "thomlab/sphere_critical.hpp"

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

using namespace thomlab;
namespace fs = std::filesystem;

namespace {

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

void emit(const nlohmann::json& j, const std::string& out) {
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(out, j, Provenance{});
        std::cerr << "wrote " << out << '\n';
    }
}

int report(const ScenarioResult& r) {
    for (const auto& c : r.checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.spec.metric << " = " << c.actual.dump();
        if (!c.pass) std::cout << "  (" << c.detail << ")";
        std::cout << '\n';
    }
    if (!r.error.empty()) std::cerr << "error: " << r.error << '\n';
    for (const auto& a : r.artifacts) std::cerr << "wrote " << a << '\n';
    std::cout << "exit " << r.exit_code << '\n';
    return r.exit_code;
}

ErrorModel parse_error_model(const std::string& spec, std::uint64_t seed) {
    // "none" or "a2:rho,N,bN,theta"
    if (spec.empty() || spec == "none") return ErrorModel::none();
    if (spec.rfind("a2:", 0) != 0) throw Error(ErrorKind::ConfigError, "--err-model must be none or a2:rho,N,bN,theta");
    std::vector<double> p;
    std::stringstream ss(spec.substr(3));
    for (std::string tok; std::getline(ss, tok, ',');) p.push_back(std::stod(tok));
    if (p.size() != 4) throw Error(ErrorKind::ConfigError, "--err-model a2 needs four parameters");
    return ErrorModel::synthetic_a2(p[0], static_cast<int>(p[1]), p[2], p[3], seed);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"thomlab: gradient-flow asymptotics toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    std::string config, out, out_dir = "out", potential_file, traj_file, model = "cubic", scheme = "etdrk4", err_model = "none";
    std::string candidates;
    int workers = default_workers();
    int starts = 200, K = 64, directions = 32, max_degree = 7, samples = 20000, N = 8;
    std::uint64_t seed = 0;
    double t0 = 0.0, t_end = 1e4, rtol = 1e-9, m = -1.0, amplitude = 0.1, theta0 = 0.0, dt = 1e-3, tol = 1e-3;
    double decades = 2.0, r = 0.1, epsilon = 1.0, omega = 0.1, rho = 0.75, b = 3.0, sample_dt = 0.0, validity = 0.5;
    std::vector<double> y0, v0, radii{0.02, 0.04, 0.08};

    auto* run = app.add_subcommand("run", "run a TOML scenario");
    auto* sweep = app.add_subcommand("sweep", "run a sweep scenario");
    for (auto* sc : {run, sweep}) {
        sc->add_option("--config", config, "scenario file")->required()->check(CLI::ExistingFile);
        sc->add_option("--out", out_dir, "output directory")->capture_default_str();
        sc->add_option("--workers", workers, "concurrent runs (default: THOMLAB_WORKERS or 1)");
    }

    auto* crit = app.add_subcommand("critical-points", "critical points of a homogeneous potential on the sphere");
    crit->add_option("--potential", potential_file)->required()->check(CLI::ExistingFile);
    crit->add_option("--starts", starts);
    crit->add_option("--seed", seed);
    crit->add_option("--out", out, "JSON file (stdout when omitted)");

    auto* simg = app.add_subcommand("simulate-gradient", "integrate y' = -grad g(y) + Err");
    auto* simh = app.add_subcommand("simulate-heavyball", "integrate x'' - m x' - grad f = 0");
    for (auto* sc : {simg, simh}) {
        sc->add_option("--potential", potential_file)->required()->check(CLI::ExistingFile);
        sc->add_option("--y0", y0)->required()->delimiter(',');
        sc->add_option("--t0", t0);
        sc->add_option("--t-end", t_end);
        sc->add_option("--rtol", rtol);
        sc->add_option("--seed", seed);
        sc->add_option("--validity-radius", validity);
        sc->add_option("--uniform-dt", sample_dt, "uniform output spacing (geometric when 0)");
        sc->add_option("--out", out_dir, "output directory")->capture_default_str();
    }
    simg->add_option("--err-model", err_model, "none or a2:rho,N,bN,theta");
    simh->add_option("--m", m);
    simh->add_option("--v0", v0)->delimiter(',');

    auto* fit = app.add_subcommand("fit-rate", "fit (ell*, alpha0) to a trajectory tail");
    auto* cls = app.add_subcommand("classify", "classify the decay of a trajectory");
    auto* sec = app.add_subcommand("secant", "secant limit and tail arclength");
    auto* a12 = app.add_subcommand("verify-a1a2", "measure the A1/A2 constants on a trajectory");
    for (auto* sc : {fit, cls, sec, a12}) {
        sc->add_option("--trajectory", traj_file)->required()->check(CLI::ExistingFile);
        sc->add_option("--out", out, "JSON file (stdout when omitted)");
    }
    for (auto* sc : {fit, cls}) {
        sc->add_option("--decades", decades);
        sc->add_option("--candidates", candidates, "comma-separated rationals, e.g. 3,7/2");
    }
    sec->add_option("--potential", potential_file)->check(CLI::ExistingFile);
    sec->add_option("--tol", tol);
    a12->add_option("--potential", potential_file)->required()->check(CLI::ExistingFile);
    a12->add_option("--rho", rho);
    a12->add_option("--N", N);

    auto* expo = app.add_subcommand("exponents", "characteristic exponents of a potential near 0");
    expo->add_option("--potential", potential_file)->required()->check(CLI::ExistingFile);
    expo->add_option("--r", r);
    expo->add_option("--epsilon", epsilon);
    expo->add_option("--omega", omega);
    expo->add_option("--samples", samples);
    expo->add_option("--seed", seed);
    expo->add_option("--out", out);

    auto* mz = app.add_subcommand("mz-check", "three-way dominance test on a PDE series CSV");
    mz->add_option("--series", traj_file)->required()->check(CLI::ExistingFile);
    mz->add_option("--b", b);
    mz->add_option("--out", out);

    auto* pde = app.add_subcommand("simulate-pde", "evolve u' = u_thth + u + s u^3 on the circle");
    pde->add_option("--model", model);
    pde->add_option("--amplitude", amplitude);
    pde->add_option("--theta0", theta0);
    pde->add_option("--K", K);
    pde->add_option("--dt", dt);
    pde->add_option("--t-end", t_end);
    pde->add_option("--scheme", scheme);
    pde->add_option("--sample-dt", sample_dt);
    pde->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* red = app.add_subcommand("reduce", "Lyapunov-Schmidt reduction of the model PDE");
    red->add_option("--model", model);
    red->add_option("--radii", radii)->delimiter(',');
    red->add_option("--directions", directions);
    red->add_option("--max-degree", max_degree);
    red->add_option("--out", out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run || *sweep) {
            const Scenario sc = Scenario::load(config);
            if (*sweep && sc.kind() != "sweep") throw Error(ErrorKind::ConfigError, config + ": kind must be sweep");
            return report(sc.run(out_dir, workers));
        }
        if (*crit) {
            CriticalSearchOptions o;
            o.n_starts = starts;
            o.seed = seed;
            const auto pts = critical_points(Potential::load(potential_file), o);
            emit({{"count", pts.size()}, {"critical_points", to_json(pts)}}, out);
            return 0;
        }
        if (*simg || *simh) {
            const Potential g = Potential::load(potential_file);
            FlowOptions o;
            o.ode.rtol = rtol;
            o.ode.uniform_dt = sample_dt;
            o.validity_radius = validity;
            Trajectory tr;
            if (*simg) {
                tr = integrate_gradient(g, to_vec(y0), t0, t_end, o, parse_error_model(err_model, seed));
            } else {
                const Vec vv = v0.empty() ? Vec::Zero(static_cast<Eigen::Index>(y0.size())) : to_vec(v0);
                tr = integrate_heavy_ball(g, m, to_vec(y0), vv, t0, t_end, o);
            }
            const Provenance prov{fnv1a_hex(tr.meta.dump()), seed};
            write_trajectory_csv((fs::path(out_dir) / "trajectory.csv").string(), tr, &g, prov);
            write_json((fs::path(out_dir) / "trajectory.json").string(), tr.meta, prov);
            std::cerr << "wrote " << (fs::path(out_dir) / "trajectory.csv").string() << '\n';
            return 0;
        }
        if (*fit || *cls) {
            FitRateOptions o;
            o.decades = decades;
            std::stringstream ss(candidates);
            for (std::string tok; std::getline(ss, tok, ',');) {
                const auto slash = tok.find('/');
                o.candidates.push_back(slash == std::string::npos
                                           ? Rational{std::stol(tok), 1}
                                           : Rational{std::stol(tok.substr(0, slash)), std::stol(tok.substr(slash + 1))});
            }
            const Trajectory tr = read_trajectory_csv(traj_file);
            emit(*fit ? fit_rate(tr, o).to_json() : classify_decay(tr, nullptr, o).to_json(), out);
            return 0;
        }
        if (*sec) {
            const Trajectory tr = read_trajectory_csv(traj_file);
            std::optional<Potential> lead;
            if (!potential_file.empty()) lead = Potential::load(potential_file).leading_part();
            emit(secant_analysis(tr, lead ? &*lead : nullptr, tol).to_json(), out);
            return 0;
        }
        if (*a12) {
            emit(verify_A1_A2(read_trajectory_csv(traj_file), Potential::load(potential_file), rho, N).to_json(), out);
            return 0;
        }
        if (*expo) {
            ExponentSampling s;
            s.r = r;
            s.epsilon = epsilon;
            s.omega = omega;
            s.n_samples = samples;
            s.seed = seed;
            emit(characteristic_exponents(Potential::load(potential_file), s).to_json(), out);
            return 0;
        }
        if (*mz) {
            const auto s = read_pde_series_csv(traj_file);
            emit(mz_trichotomy(s.t, s.Xplus, s.Xzero, s.Xminus, b).to_json(), out);
            return 0;
        }
        if (*pde) {
            PdeOptions o;
            o.K = K;
            o.dt = dt;
            o.t_end = t_end;
            o.scheme = scheme_from_name(scheme);
            o.sample_dt = sample_dt;
            const auto rep = slow_decay_report(amplitude, theta0, PdeModel::from_name(model), o);
            const Provenance prov{fnv1a_hex(rep.run.meta.dump()), 0};
            write_pde_series_csv((fs::path(out_dir) / "series.csv").string(), rep.run, prov);
            write_snapshot_csv((fs::path(out_dir) / "snapshot.csv").string(), rep.run.final_state, prov);
            write_json((fs::path(out_dir) / "pde.json").string(), rep.to_json(), prov);
            std::cerr << "wrote " << (fs::path(out_dir) / "series.csv").string() << '\n';
            std::cout << "sqrt(t)*||u|| at t_end = " << format_double(rep.sqrt_t_norm_final) << '\n';
            return 0;
        }
        if (*red) {
            const ReducedModel rm(PdeModel::from_name(model));
            const auto f = fit_reduced_polynomial(rm, radii, directions, max_degree);
            auto j = f.to_json();
            j["trust_radius"] = rm.settings().rho;
            j["adams_simon"] = to_string(adams_simon_from_reduction(f).verdict);
            emit(j, out);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
