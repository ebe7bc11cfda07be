#pragma once

#include "thomlab/ode.hpp"
#include "thomlab/potential.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace thomlab {

/// Time-stamped samples of a flow. v is either empty or has one entry per sample.
struct Trajectory {
    std::vector<double> t;
    std::vector<Vec> y;
    std::vector<Vec> v;
    nlohmann::json meta = nlohmann::json::object();

    std::size_t size() const { return t.size(); }
    bool has_velocity() const { return !v.empty(); }
    int dimension() const { return y.empty() ? 0 : static_cast<int>(y.front().size()); }
    std::vector<double> norms() const;
    /// Checks the invariants (increasing t, finite entries, matching lengths); throws InvalidArgument.
    void validate() const;
};

/// Perturbation injected into the gradient flow, y' = -grad g(y) + Err(t, y).
struct ErrorModel {
    enum class Kind { None, SyntheticA2 };
    Kind kind = Kind::None;
    double rho = 0.75;
    int N = 8;
    double bN = 1.0;
    double theta = 1.0;   // fraction of the bound actually used
    std::uint64_t seed = 0;

    std::string description() const;
    nlohmann::json to_json() const;
    static ErrorModel none() { return {}; }
    static ErrorModel synthetic_a2(double rho, int N, double bN, double theta, std::uint64_t seed);

    /// Bound b_N (|y|^rho |grad g| + |y|^N).
    double bound(const Vec& y, const Vec& grad) const;
};

struct FlowOptions {
    OdeControl ode;
    double validity_radius = 0.5;
    double blowup_factor = 10.0;
};

/// Integrates y' = -grad g(y) + Err. The stored velocity is the realized right-hand side.
/// Throws BlowUp when |y| exceeds blowup_factor |y0| or leaves the ball of radius
/// max(validity_radius, |y0|); StiffnessFailure on step underflow.
Trajectory integrate_gradient(const Potential& g, const Vec& y0, double t0, double t_end,
                              const FlowOptions& opts = {}, const ErrorModel& err = {});

/// Integrates x'' - m x' - grad f(x) = 0 as a first-order system in (y, v).
Trajectory integrate_heavy_ball(const Potential& f, double m, const Vec& y0, const Vec& v0, double t0,
                                double t_end, const FlowOptions& opts = {});

} // namespace thomlab
