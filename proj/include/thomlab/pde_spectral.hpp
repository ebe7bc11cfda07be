#pragma once

#include "thomlab/asymptotics.hpp"
#include "thomlab/flow.hpp"

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace thomlab {

using cplx = std::complex<double>;

/// u' = u_thth + u + s u^3 on the circle; s = -1 is the cubic model.
struct PdeModel {
    double s = -1.0;
    std::string name = "cubic";

    static PdeModel cubic() { return {-1.0, "cubic"}; }
    static PdeModel sign_flipped() { return {1.0, "sign_flipped"}; }
    static PdeModel linear() { return {0.0, "linear"}; }
    /// "cubic", "sign_flipped" or "linear"; ConfigError otherwise.
    static PdeModel from_name(const std::string& name);
};

/// Fourier coefficients c_0..c_K of a real field u = sum_k c_k e^{ik theta}; c_{-k} = conj(c_k).
class SpectralState {
public:
    explicit SpectralState(int K = 0);
    static SpectralState from_function(const std::function<double(double)>& u, int K);
    /// Inverse of project_modes.
    static SpectralState from_modes(int K, const Vec& xi);

    int K() const { return static_cast<int>(c.size()) - 1; }
    cplx coef(int k) const;
    double l2_norm() const;
    /// Grid values at theta_j = 2 pi j / N, N > 2K.
    Vec values(int N) const;
    double value_at(double theta) const;
    /// u(theta - psi).
    SpectralState rotated(double psi) const;
    /// Zero-padded or truncated copy.
    SpectralState resized(int K) const;
    void validate() const;

    std::vector<cplx> c;
    double time = 0.0;
};

/// Amplitudes on the orthonormal eigenmodes 1/sqrt(2 pi), cos(k theta)/sqrt(pi), sin(k theta)/sqrt(pi),
/// ordered (const, cos1, sin1, cos2, sin2, ...). x holds the two neutral coordinates.
struct ModeEntry {
    Vec xi;
    Eigen::Vector2d x;
};

ModeEntry project_modes(const SpectralState& s);

/// F(u) = int (u_th^2/2 - u^2/2 - s u^4/4) dtheta.
double pde_energy(const SpectralState& u, const PdeModel& model);

enum class PdeScheme { ETDRK4, IMEXEuler };
std::string_view to_string(PdeScheme s);
PdeScheme scheme_from_name(const std::string& name);

enum class PdeStatus { Completed, ExitedBall, Unstable };
std::string_view to_string(PdeStatus s);

struct PdeOptions {
    int K = 64;
    double dt = 1e-3;
    /// Step doubles at every power of two of t beyond 1 (relative step dt*t); false keeps dt fixed.
    bool grow_dt = true;
    double dt_max = 1e300;
    PdeScheme scheme = PdeScheme::ETDRK4;
    double t_end = 1.0;
    /// Uniform sampling when positive; geometric (per decade) otherwise.
    double sample_dt = 0.0;
    int samples_per_decade = 25;
    double validity_radius = 1.0;
    /// Zero every mode outside the closure of the initial support under cubic sums k1+k2+k3.
    bool symmetry_closure = true;
    double energy_slack = 1e-10;
    bool keep_states = false;
};

struct PdeRun {
    std::vector<double> t;
    std::vector<double> norm;
    std::vector<Eigen::Vector2d> x;
    std::vector<double> energy;
    std::vector<double> Xplus;   // |xi_0|: the unstable constant mode
    std::vector<double> Xzero;   // neutral pair k = 1
    std::vector<double> Xminus;  // k >= 2
    std::vector<Vec> xi;
    std::vector<SpectralState> states;  // when keep_states
    SpectralState final_state;
    PdeStatus status = PdeStatus::Completed;
    std::string status_detail;
    long steps = 0;
    long energy_violations = 0;
    double max_energy_increase = 0.0;
    double max_constant_mode = 0.0;
    nlohmann::json meta = nlohmann::json::object();

    /// Mode amplitudes as a trajectory (y = xi).
    Trajectory modes() const;
    /// Neutral coordinates as a trajectory (y = x).
    Trajectory neutral() const;
};

PdeRun evolve(const SpectralState& init, const PdeModel& model, const PdeOptions& opts);
/// Fixed-step variant: n_steps steps of size dt, sampled every step.
PdeRun evolve(const SpectralState& init, const PdeModel& model, double dt, long n_steps,
              PdeScheme scheme = PdeScheme::ETDRK4);

struct SlowDecayReport {
    PdeRun run;
    std::vector<double> sqrt_t_norm;
    double sqrt_t_norm_final = 0.0;
    double direction_angle = 0.0;   // atan2(x2, x1) at the last sample
    nlohmann::json to_json() const;
};

/// Runs from amplitude cos(theta - theta0). Throws UnstableModeExcited when |xi_0| exceeds 1e-6.
SlowDecayReport slow_decay_report(double amplitude, double theta0, const PdeModel& model, PdeOptions opts);

} // namespace thomlab
