#include "thomlab/pde_spectral.hpp"

#include "thomlab/error.hpp"
#include "thomlab/ode.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace thomlab {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

int grid_size(int K) {
    int N = 8;
    while (N < 4 * K + 1) N *= 2;
    return N;
}

class Fft {
public:
    explicit Fft(int N) : n_(N) {
        std::lock_guard lock(plan_mutex());
        real_ = fftw_alloc_real(N);
        spec_ = fftw_alloc_complex(N / 2 + 1);
        fwd_ = fftw_plan_dft_r2c_1d(N, real_, spec_, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_1d(N, spec_, real_, FFTW_ESTIMATE);
        if (!real_ || !spec_ || !fwd_ || !bwd_) throw Error(ErrorKind::InvalidArgument, "FFTW plan creation failed");
    }
    ~Fft() {
        std::lock_guard lock(plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_);
        fftw_free(spec_);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    int size() const { return n_; }

    void to_grid(const std::vector<cplx>& c, std::vector<double>& u) {
        const int K = static_cast<int>(c.size()) - 1;
        for (int k = 0; k <= n_ / 2; ++k) {
            const cplx v = k <= K ? c[k] : cplx{};
            spec_[k][0] = v.real();
            spec_[k][1] = k == 0 ? 0.0 : v.imag();
        }
        fftw_execute(bwd_);
        u.assign(real_, real_ + n_);
    }

    void to_coeffs(const std::vector<double>& u, int K, std::vector<cplx>& c) {
        std::copy(u.begin(), u.end(), real_);
        fftw_execute(fwd_);
        c.assign(K + 1, cplx{});
        for (int k = 0; k <= K && k <= n_ / 2; ++k) c[k] = cplx{spec_[k][0], spec_[k][1]} / static_cast<double>(n_);
        c[0] = c[0].real();
    }

private:
    int n_;
    double* real_ = nullptr;
    fftw_complex* spec_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

double lambda_k(int k) { return 1.0 - static_cast<double>(k) * k; }

// Modes reachable from the initial support under k1 + k2 + k3 (signed, |k| <= K).
std::vector<bool> cubic_closure(const std::vector<cplx>& c, double s) {
    const int K = static_cast<int>(c.size()) - 1;
    double cmax = 0.0;
    for (const auto& v : c) cmax = std::max(cmax, std::abs(v));
    std::vector<bool> on(2 * K + 1, false);  // index k + K
    for (int k = 0; k <= K; ++k) {
        if (std::abs(c[k]) > 1e-14 * cmax) on[K + k] = on[K - k] = true;
    }
    if (s == 0.0) return std::vector<bool>(on.begin() + K, on.end());
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<bool> two(4 * K + 1, false);
        for (int a = -K; a <= K; ++a) {
            if (!on[K + a]) continue;
            for (int b = -K; b <= K; ++b) {
                if (on[K + b]) two[2 * K + a + b] = true;
            }
        }
        for (int ab = -2 * K; ab <= 2 * K; ++ab) {
            if (!two[2 * K + ab]) continue;
            for (int d = -K; d <= K; ++d) {
                const int k = ab + d;
                if (on[K + d] && k >= -K && k <= K && !on[K + k]) {
                    on[K + k] = true;
                    changed = true;
                }
            }
        }
    }
    return std::vector<bool>(on.begin() + K, on.end());
}

struct EtdCoeffs {
    std::vector<double> E, E2, Q, f1, f2, f3;
};

// Contour-integral evaluation of the ETDRK4 phi-functions (32 points on the unit circle).
EtdCoeffs etd_coeffs(int K, double h) {
    constexpr int M = 32;
    EtdCoeffs co;
    for (auto* v : {&co.E, &co.E2, &co.Q, &co.f1, &co.f2, &co.f3}) v->resize(K + 1);
    for (int k = 0; k <= K; ++k) {
        const double L = lambda_k(k) * h;
        co.E[k] = std::exp(L);
        co.E2[k] = std::exp(L / 2.0);
        cplx q{}, a{}, b{}, c{};
        for (int j = 0; j < M; ++j) {
            const cplx z = L + std::exp(cplx{0.0, kPi * (j + 0.5) / M});
            const cplx ez = std::exp(z);
            const cplx z3 = z * z * z;
            q += (std::exp(z / 2.0) - 1.0) / z;
            a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
            b += (2.0 + z + ez * (z - 2.0)) / z3;
            c += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
        }
        co.Q[k] = h * q.real() / M;
        co.f1[k] = h * a.real() / M;
        co.f2[k] = h * b.real() / M;
        co.f3[k] = h * c.real() / M;
    }
    return co;
}

class Stepper {
public:
    Stepper(int K, const PdeModel& model, std::vector<bool> mask, PdeScheme scheme)
        : K_(K), s_(model.s), mask_(std::move(mask)), scheme_(scheme), fft_(grid_size(K)) {}

    void nonlinear(const std::vector<cplx>& c, std::vector<cplx>& out) {
        if (s_ == 0.0) {
            out.assign(K_ + 1, cplx{});
            return;
        }
        fft_.to_grid(c, grid_);
        for (double& u : grid_) u = s_ * u * u * u;
        fft_.to_coeffs(grid_, K_, out);
        apply_mask(out);
    }

    void apply_mask(std::vector<cplx>& c) const {
        for (int k = 0; k <= K_; ++k) {
            if (!mask_[k]) c[k] = {};
        }
    }

    void step(std::vector<cplx>& v, double h) {
        if (scheme_ == PdeScheme::IMEXEuler) {
            nonlinear(v, nv_);
            for (int k = 0; k <= K_; ++k) {
                const double L = lambda_k(k);
                // Backward Euler on the stable part, forward Euler on the growing constant mode.
                v[k] = L <= 0.0 ? (v[k] + h * nv_[k]) / (1.0 - h * L) : v[k] * (1.0 + h * L) + h * nv_[k];
            }
            apply_mask(v);
            return;
        }
        const EtdCoeffs& co = coeffs(h);
        nonlinear(v, nv_);
        a_.resize(K_ + 1);
        for (int k = 0; k <= K_; ++k) a_[k] = co.E2[k] * v[k] + co.Q[k] * nv_[k];
        nonlinear(a_, na_);
        b_.resize(K_ + 1);
        for (int k = 0; k <= K_; ++k) b_[k] = co.E2[k] * v[k] + co.Q[k] * na_[k];
        nonlinear(b_, nb_);
        c_.resize(K_ + 1);
        for (int k = 0; k <= K_; ++k) c_[k] = co.E2[k] * a_[k] + co.Q[k] * (2.0 * nb_[k] - nv_[k]);
        nonlinear(c_, nc_);
        for (int k = 0; k <= K_; ++k) {
            v[k] = co.E[k] * v[k] + nv_[k] * co.f1[k] + 2.0 * (na_[k] + nb_[k]) * co.f2[k] + nc_[k] * co.f3[k];
        }
        v[0] = v[0].real();
        apply_mask(v);
    }

    double quartic(const std::vector<cplx>& c) {
        fft_.to_grid(c, grid_);
        double sum = 0.0;
        for (double u : grid_) sum += u * u * u * u;
        return 2.0 * kPi * sum / fft_.size();
    }

private:
    const EtdCoeffs& coeffs(double h) {
        auto it = cache_.find(h);
        if (it != cache_.end()) return it->second;
        if (cache_.size() > 64) cache_.clear();
        return cache_.emplace(h, etd_coeffs(K_, h)).first->second;
    }

    int K_;
    double s_;
    std::vector<bool> mask_;
    PdeScheme scheme_;
    Fft fft_;
    std::map<double, EtdCoeffs> cache_;
    std::vector<double> grid_;
    std::vector<cplx> nv_, na_, nb_, nc_, a_, b_, c_;
};

double energy_from(const std::vector<cplx>& c, double quartic, double s) {
    double quad = -kPi * std::norm(c[0]);
    for (std::size_t k = 1; k < c.size(); ++k) quad += 2.0 * kPi * (static_cast<double>(k * k) - 1.0) * std::norm(c[k]);
    return quad - 0.25 * s * quartic;
}

} // namespace

PdeModel PdeModel::from_name(const std::string& name) {
    if (name == "cubic") return cubic();
    if (name == "sign_flipped" || name == "sign-flipped") return sign_flipped();
    if (name == "linear") return linear();
    throw Error(ErrorKind::ConfigError, "unknown PDE model '" + name + "' (expected cubic, sign_flipped or linear)");
}

SpectralState::SpectralState(int K) : c(static_cast<std::size_t>(std::max(K, 0)) + 1) {
    if (K < 0) throw Error(ErrorKind::InvalidArgument, "mode cutoff must be nonnegative");
}

SpectralState SpectralState::from_function(const std::function<double(double)>& u, int K) {
    SpectralState s(K);
    Fft fft(grid_size(K));
    std::vector<double> g(fft.size());
    for (int j = 0; j < fft.size(); ++j) g[j] = u(2.0 * kPi * j / fft.size());
    fft.to_coeffs(g, K, s.c);
    return s;
}

SpectralState SpectralState::from_modes(int K, const Vec& xi) {
    if (xi.size() != 2 * K + 1) throw Error(ErrorKind::DimensionMismatch, "mode vector must have length 2K+1");
    SpectralState s(K);
    s.c[0] = xi[0] / std::sqrt(2.0 * kPi);
    for (int k = 1; k <= K; ++k) s.c[k] = cplx{xi[2 * k - 1], -xi[2 * k]} / (2.0 * std::sqrt(kPi));
    return s;
}

cplx SpectralState::coef(int k) const {
    const int a = std::abs(k);
    if (a > K()) return {};
    return k >= 0 ? c[a] : std::conj(c[a]);
}

double SpectralState::l2_norm() const {
    double s = std::norm(c[0]);
    for (std::size_t k = 1; k < c.size(); ++k) s += 2.0 * std::norm(c[k]);
    return std::sqrt(2.0 * kPi * s);
}

Vec SpectralState::values(int N) const {
    if (N <= 2 * K()) throw Error(ErrorKind::InvalidArgument, "grid too coarse for the mode cutoff");
    Fft fft(N);
    std::vector<double> g;
    fft.to_grid(c, g);
    return Eigen::Map<const Vec>(g.data(), N);
}

double SpectralState::value_at(double theta) const {
    double v = c[0].real();
    for (int k = 1; k <= K(); ++k) v += 2.0 * (c[k] * std::exp(cplx{0.0, k * theta})).real();
    return v;
}

SpectralState SpectralState::rotated(double psi) const {
    SpectralState s = *this;
    for (int k = 1; k <= K(); ++k) s.c[k] *= std::exp(cplx{0.0, -k * psi});
    return s;
}

SpectralState SpectralState::resized(int K) const {
    SpectralState s(K);
    for (int k = 0; k <= std::min(K, this->K()); ++k) s.c[k] = c[k];
    s.time = time;
    return s;
}

void SpectralState::validate() const {
    if (c.empty()) throw Error(ErrorKind::InvalidArgument, "spectral state has no coefficients");
    if (c[0].imag() != 0.0) throw Error(ErrorKind::InvalidArgument, "c_0 of a real field must be real");
    for (const auto& v : c) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            throw Error(ErrorKind::InvalidArgument, "non-finite Fourier coefficient");
        }
    }
}

ModeEntry project_modes(const SpectralState& s) {
    const int K = s.K();
    ModeEntry m;
    m.xi.resize(2 * K + 1);
    m.xi[0] = std::sqrt(2.0 * kPi) * s.c[0].real();
    const double f = 2.0 * std::sqrt(kPi);
    for (int k = 1; k <= K; ++k) {
        m.xi[2 * k - 1] = f * s.c[k].real();
        m.xi[2 * k] = -f * s.c[k].imag();
    }
    m.x = K >= 1 ? Eigen::Vector2d(m.xi[1], m.xi[2]) : Eigen::Vector2d::Zero();
    return m;
}

double pde_energy(const SpectralState& u, const PdeModel& model) {
    double quartic = 0.0;
    if (model.s != 0.0) {
        Fft fft(grid_size(u.K()));
        std::vector<double> g;
        fft.to_grid(u.c, g);
        for (double v : g) quartic += v * v * v * v;
        quartic *= 2.0 * kPi / fft.size();
    }
    return energy_from(u.c, quartic, model.s);
}

std::string_view to_string(PdeScheme s) { return s == PdeScheme::ETDRK4 ? "etdrk4" : "imex_euler"; }

PdeScheme scheme_from_name(const std::string& name) {
    if (name == "etdrk4") return PdeScheme::ETDRK4;
    if (name == "imex_euler" || name == "imex") return PdeScheme::IMEXEuler;
    throw Error(ErrorKind::ConfigError, "unknown scheme '" + name + "' (expected etdrk4 or imex_euler)");
}

std::string_view to_string(PdeStatus s) {
    switch (s) {
    case PdeStatus::Completed: return "completed";
    case PdeStatus::ExitedBall: return "exited_validity_ball";
    case PdeStatus::Unstable: return "unstable";
    }
    return "?";
}

Trajectory PdeRun::modes() const {
    Trajectory tr;
    tr.t = t;
    tr.y = xi;
    tr.meta = meta;
    return tr;
}

Trajectory PdeRun::neutral() const {
    Trajectory tr;
    tr.t = t;
    for (const auto& v : x) tr.y.push_back(v);
    tr.meta = meta;
    return tr;
}

PdeRun evolve(const SpectralState& init, const PdeModel& model, const PdeOptions& opts) {
    init.validate();
    if (opts.K < 1) throw Error(ErrorKind::InvalidArgument, "K must be at least 1");
    if (!(opts.dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    if (!(opts.t_end > init.time)) throw Error(ErrorKind::InvalidArgument, "t_end must exceed the initial time");

    std::vector<cplx> v = init.resized(opts.K).c;
    const std::vector<bool> mask = opts.symmetry_closure ? cubic_closure(v, model.s) : std::vector<bool>(opts.K + 1, true);
    Stepper stepper(opts.K, model, mask, opts.scheme);
    stepper.apply_mask(v);

    OdeControl grid_ctrl;
    grid_ctrl.uniform_dt = opts.sample_dt;
    grid_ctrl.samples_per_decade = opts.samples_per_decade;
    const auto grid = output_grid(init.time, opts.t_end, grid_ctrl);

    PdeRun run;
    SpectralState cur(opts.K);
    const auto record = [&](double t) {
        cur.c = v;
        cur.time = t;
        const ModeEntry m = project_modes(cur);
        run.t.push_back(t);
        run.norm.push_back(cur.l2_norm());
        run.x.push_back(m.x);
        run.energy.push_back(energy_from(v, model.s != 0.0 ? stepper.quartic(v) : 0.0, model.s));
        run.Xplus.push_back(std::abs(m.xi[0]));
        run.Xzero.push_back(m.x.norm());
        run.Xminus.push_back(m.xi.tail(m.xi.size() - 3).norm());
        run.xi.push_back(m.xi);
        run.max_constant_mode = std::max(run.max_constant_mode, run.Xplus.back());
        if (opts.keep_states) run.states.push_back(cur);
    };

    double t = init.time;
    record(t);
    double F = run.energy.back();
    std::vector<cplx> last = v;
    const auto dt_at = [&](double tt) {
        if (!opts.grow_dt || tt < 1.0) return std::min(opts.dt, opts.dt_max);
        return std::min(opts.dt * std::exp2(std::floor(std::log2(tt))), opts.dt_max);
    };

    for (std::size_t i = 1; i < grid.size() && run.status == PdeStatus::Completed; ++i) {
        const double target = grid[i];
        while (t < target) {
            double h = dt_at(t);
            if (t + h >= target - 1e-12 * std::max(1.0, target)) h = target - t;
            last = v;
            stepper.step(v, h);
            ++run.steps;
            t = (t + h >= target - 1e-12 * std::max(1.0, target)) ? target : t + h;

            bool finite = true;
            double n2 = std::norm(v[0]);
            for (std::size_t k = 0; k < v.size(); ++k) {
                finite = finite && std::isfinite(v[k].real()) && std::isfinite(v[k].imag());
                if (k > 0) n2 += 2.0 * std::norm(v[k]);
            }
            if (!finite) {
                v = last;
                run.status = PdeStatus::Unstable;
                run.status_detail = "non-finite coefficients at t = " + std::to_string(t) + "; last valid state kept";
                t -= h;
                break;
            }
            const double Fn = energy_from(v, model.s != 0.0 ? stepper.quartic(v) : 0.0, model.s);
            if (Fn - F > opts.energy_slack) {
                ++run.energy_violations;
                run.max_energy_increase = std::max(run.max_energy_increase, Fn - F);
            }
            F = Fn;
            if (std::sqrt(2.0 * kPi * n2) > opts.validity_radius) {
                run.status = PdeStatus::ExitedBall;
                run.status_detail = "L2 norm left the validity ball at t = " + std::to_string(t);
                record(t);
                break;
            }
        }
        if (run.status == PdeStatus::Completed) record(t);
    }
    if (run.status == PdeStatus::Unstable) record(t);

    run.final_state.c = v;
    run.final_state.time = t;
    long kept = std::count(mask.begin(), mask.end(), true);
    run.meta = {{"kind", "pde"},
                {"model", model.name},
                {"s", model.s},
                {"K", opts.K},
                {"grid_points", grid_size(opts.K)},
                {"dt", opts.dt},
                {"grow_dt", opts.grow_dt},
                {"scheme", to_string(opts.scheme)},
                {"t_end", opts.t_end},
                {"symmetry_closure", opts.symmetry_closure},
                {"active_modes", kept},
                {"status", to_string(run.status)},
                {"steps", run.steps},
                {"energy_violations", run.energy_violations},
                {"threads", 1}};
    return run;
}

PdeRun evolve(const SpectralState& init, const PdeModel& model, double dt, long n_steps, PdeScheme scheme) {
    if (n_steps <= 0) throw Error(ErrorKind::InvalidArgument, "n_steps must be positive");
    PdeOptions o;
    o.K = std::max(init.K(), 1);
    o.dt = dt;
    o.grow_dt = false;
    o.scheme = scheme;
    o.t_end = init.time + dt * static_cast<double>(n_steps);
    o.sample_dt = dt;
    return evolve(init, model, o);
}

nlohmann::json SlowDecayReport::to_json() const {
    return {{"sqrt_t_norm_final", sqrt_t_norm_final},
            {"direction_angle", direction_angle},
            {"status", to_string(run.status)},
            {"max_constant_mode", run.max_constant_mode},
            {"energy_violations", run.energy_violations},
            {"meta", run.meta}};
}

SlowDecayReport slow_decay_report(double amplitude, double theta0, const PdeModel& model, PdeOptions opts) {
    if (!(std::abs(amplitude) <= 0.2)) throw Error(ErrorKind::InvalidArgument, "amplitude must be at most 0.2");
    SpectralState init(opts.K);
    init.c[1] = 0.5 * amplitude * std::exp(cplx{0.0, -theta0});
    SlowDecayReport rep;
    rep.run = evolve(init, model, opts);
    if (rep.run.max_constant_mode > 1e-6) {
        throw Error(ErrorKind::UnstableModeExcited,
                    "constant mode reached " + std::to_string(rep.run.max_constant_mode));
    }
    for (std::size_t i = 0; i < rep.run.t.size(); ++i) rep.sqrt_t_norm.push_back(std::sqrt(rep.run.t[i]) * rep.run.norm[i]);
    rep.sqrt_t_norm_final = rep.sqrt_t_norm.back();
    const auto& x = rep.run.x.back();
    rep.direction_angle = std::atan2(x[1], x[0]);
    rep.run.meta["amplitude"] = amplitude;
    rep.run.meta["theta0"] = theta0;
    return rep;
}

} // namespace thomlab
