#include "thomlab/flow.hpp"

#include "thomlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace thomlab {

namespace {

// Smooth pseudorandom unit vector field in t: a fixed offset of norm 2 plus a few
// sinusoids in log(1+t) of total norm below 2, then normalized. Never vanishes.
class DirectionField {
public:
    DirectionField(int n, std::uint64_t seed) : offset_(n) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (int i = 0; i < n; ++i) offset_[i] = gauss(rng);
        if (offset_.norm() == 0.0) offset_[0] = 1.0;
        offset_ *= 2.0 / offset_.norm();
        for (int j = 0; j < kWaves; ++j) {
            Vec a(n);
            for (int i = 0; i < n; ++i) a[i] = gauss(rng);
            if (a.norm() == 0.0) a[0] = 1.0;
            amp_.push_back(a * (0.4 / a.norm()));
            freq_.push_back(0.5 + 3.0 * unif(rng));
            phase_.push_back(2.0 * std::numbers::pi * unif(rng));
        }
    }

    Vec operator()(double t) const {
        const double tau = std::log1p(std::abs(t));
        Vec d = offset_;
        for (int j = 0; j < kWaves; ++j) d += amp_[j] * std::sin(freq_[j] * tau + phase_[j]);
        return d / d.norm();
    }

private:
    static constexpr int kWaves = 4;
    Vec offset_;
    std::vector<Vec> amp_;
    std::vector<double> freq_;
    std::vector<double> phase_;
};

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

nlohmann::json ode_meta(const OdeControl& c, const OdeOutput& o) {
    return {{"rtol", c.rtol}, {"atol", c.atol}, {"log_time", c.log_time},
            {"samples_per_decade", c.samples_per_decade}, {"uniform_dt", c.uniform_dt},
            {"steps", o.steps}, {"rejected_steps", o.rejected}};
}

void check_escape(const Vec& y, int n, double y0_norm, const FlowOptions& opts, double t) {
    const double r = y.head(n).norm();
    const double ball = std::max(opts.validity_radius, y0_norm);
    if (!std::isfinite(r) || r > opts.blowup_factor * y0_norm || r > ball) {
        throw Error(ErrorKind::BlowUp, "|y| = " + fmt(r) + " at t = " + fmt(t) + " (|y0| = " + fmt(y0_norm) +
                                           ", validity radius " + fmt(ball) + ")");
    }
}

// Stored samples must have increasing t; backward runs are reversed.
void finish(Trajectory& tr) {
    if (tr.t.size() > 1 && tr.t.back() < tr.t.front()) {
        std::reverse(tr.t.begin(), tr.t.end());
        std::reverse(tr.y.begin(), tr.y.end());
        std::reverse(tr.v.begin(), tr.v.end());
    }
}

} // namespace

std::vector<double> Trajectory::norms() const {
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i].norm();
    return r;
}

void Trajectory::validate() const {
    if (y.size() != t.size()) throw Error(ErrorKind::InvalidArgument, "trajectory: t and y lengths differ");
    if (!v.empty() && v.size() != t.size()) throw Error(ErrorKind::InvalidArgument, "trajectory: v length differs");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i]) || !y[i].allFinite()) {
            throw Error(ErrorKind::InvalidArgument, "trajectory: non-finite sample " + std::to_string(i));
        }
        if (i > 0 && !(t[i] > t[i - 1])) {
            throw Error(ErrorKind::InvalidArgument, "trajectory: t not strictly increasing at " + std::to_string(i));
        }
        if (y[i].size() != y[0].size()) throw Error(ErrorKind::InvalidArgument, "trajectory: ragged samples");
        if (!v.empty() && (v[i].size() != y[i].size() || !v[i].allFinite())) {
            throw Error(ErrorKind::InvalidArgument, "trajectory: bad velocity at " + std::to_string(i));
        }
    }
}

std::string ErrorModel::description() const {
    if (kind == Kind::None) return "none";
    return "synthetic_a2(rho=" + fmt(rho) + ", N=" + std::to_string(N) + ", bN=" + fmt(bN) +
           ", theta=" + fmt(theta) + ", seed=" + std::to_string(seed) + ")";
}

nlohmann::json ErrorModel::to_json() const {
    if (kind == Kind::None) return {{"kind", "none"}};
    return {{"kind", "synthetic_a2"}, {"rho", rho}, {"N", N}, {"bN", bN}, {"theta", theta}, {"seed", seed}};
}

ErrorModel ErrorModel::synthetic_a2(double rho, int N, double bN, double theta, std::uint64_t seed) {
    if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorKind::InvalidArgument, "rho must lie in (0,1)");
    if (N < 1) throw Error(ErrorKind::InvalidArgument, "N must be positive");
    if (!(bN >= 0.0)) throw Error(ErrorKind::InvalidArgument, "bN must be nonnegative");
    if (!(theta >= 0.0 && theta <= 1.0)) throw Error(ErrorKind::InvalidArgument, "theta must lie in [0,1]");
    ErrorModel e;
    e.kind = Kind::SyntheticA2;
    e.rho = rho;
    e.N = N;
    e.bN = bN;
    e.theta = theta;
    e.seed = seed;
    return e;
}

double ErrorModel::bound(const Vec& y, const Vec& grad) const {
    const double r = y.norm();
    return bN * (std::pow(r, rho) * grad.norm() + std::pow(r, N));
}

Trajectory integrate_gradient(const Potential& g, const Vec& y0, double t0, double t_end, const FlowOptions& opts,
                              const ErrorModel& err) {
    if (y0.size() != g.dimension()) throw Error(ErrorKind::DimensionMismatch, "y0 length differs from dimension");
    if (t_end == t0) throw Error(ErrorKind::InvalidArgument, "empty time interval");
    g.homogeneous_components();  // rejects constant/linear parts
    const int n = g.dimension();
    const double r0 = y0.norm();
    const bool perturbed = err.kind == ErrorModel::Kind::SyntheticA2;
    const DirectionField field(n, err.seed);
    long bound_violations = 0;

    const auto velocity = [&](double t, const Vec& y) -> Vec {
        const Vec grad = g.grad(y);
        if (!perturbed) return -grad;
        const double b = err.bound(y, grad);
        const Vec e = err.theta * b * field(t);
        return -grad + e;
    };
    const OdeRhs rhs = [&](double t, const Vec& y, Vec& dy) { dy = velocity(t, y); };
    const StepObserver observer = [&](double t, const Vec& y) {
        check_escape(y, n, r0, opts, t);
        if (perturbed) {
            const Vec grad = g.grad(y);
            const double e = (velocity(t, y) + grad).norm();
            if (e > err.bound(y, grad) * (1.0 + 1e-12) + 1e-300) ++bound_violations;
        }
    };

    const OdeOutput out = integrate_ode(rhs, y0, t0, t_end, opts.ode, observer);
    Trajectory tr;
    tr.t = out.t;
    tr.y = out.y;
    tr.v.reserve(out.y.size());
    for (std::size_t i = 0; i < out.y.size(); ++i) tr.v.push_back(velocity(out.t[i], out.y[i]));
    tr.meta = {{"kind", "gradient"},
               {"potential", g.label()},
               {"potential_json", g.to_json()},
               {"integrator", "dopri5"},
               {"ode", ode_meta(opts.ode, out)},
               {"validity_radius", opts.validity_radius},
               {"error_model", err.to_json()},
               {"error_model_description", err.description()},
               {"error_bound_violations", bound_violations},
               {"seed", err.seed}};
    finish(tr);
    return tr;
}

Trajectory integrate_heavy_ball(const Potential& f, double m, const Vec& y0, const Vec& v0, double t0, double t_end,
                                const FlowOptions& opts) {
    if (m == 0.0 || !std::isfinite(m)) throw Error(ErrorKind::InvalidArgument, "m must be a nonzero real");
    const int n = f.dimension();
    if (y0.size() != n || v0.size() != n) throw Error(ErrorKind::DimensionMismatch, "initial data length differs");
    if (t_end == t0) throw Error(ErrorKind::InvalidArgument, "empty time interval");
    f.homogeneous_components();
    const double r0 = y0.norm();

    Vec z0(2 * n);
    z0 << y0, v0;
    const OdeRhs rhs = [&](double, const Vec& z, Vec& dz) {
        dz.resize(2 * n);
        dz.head(n) = z.tail(n);
        dz.tail(n) = m * z.tail(n) + f.grad(z.head(n));
    };
    const StepObserver observer = [&](double t, const Vec& z) {
        if (r0 > 0.0) check_escape(z, n, r0, opts, t);
    };
    const OdeOutput out = integrate_ode(rhs, z0, t0, t_end, opts.ode, observer);
    Trajectory tr;
    tr.t = out.t;
    for (const auto& z : out.y) {
        tr.y.push_back(z.head(n));
        tr.v.push_back(z.tail(n));
    }
    tr.meta = {{"kind", "heavy_ball"},
               {"potential", f.label()},
               {"potential_json", f.to_json()},
               {"m", m},
               {"integrator", "dopri5"},
               {"ode", ode_meta(opts.ode, out)},
               {"validity_radius", opts.validity_radius},
               {"error_model", ErrorModel{}.to_json()},
               {"seed", 0}};
    finish(tr);
    return tr;
}

} // namespace thomlab
