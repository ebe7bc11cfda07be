#pragma once

#include "thomlab/flow.hpp"
#include "thomlab/linearized.hpp"
#include "thomlab/potential.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace thomlab {

struct Rational {
    long num = 0;
    long den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

/// Smallest-denominator rational within rel_tol*|x| of x (denominator <= max_den).
std::optional<Rational> snap_rational(double x, double rel_tol, long max_den = 64);
/// Smallest-denominator rational in [lo, hi] (denominator <= max_den).
std::optional<Rational> simplest_in(double lo, double hi, long max_den = 64);
/// Closest rational with denominator <= max_den.
Rational best_rational(double x, long max_den = 64);

struct RateFit {
    double ell_star = 0.0;       // snapped when a rational lies within 1%, else ell_raw
    double ell_raw = 0.0;        // unsnapped minimizer
    double ell_loglog = 0.0;     // from the log-log slope alone
    std::optional<Rational> rational;
    double alpha0 = 0.0;
    double alpha0_loglog = 0.0;  // prefactor estimate, reported for comparison
    double t_lo = 0.0;
    double t_hi = 0.0;
    double residual = 0.0;       // max |kappa(t)/t - 1| on the window
    std::string method;
    nlohmann::json to_json() const;
};

struct FitRateOptions {
    double decades = 2.0;
    std::vector<Rational> candidates;   // snap targets; empty means any rational with den <= max_den
    long max_den = 64;
    double snap_tol = 0.01;
    double algebraic_gate = 0.05;       // RMS of the log-log residual accepted as algebraic
    double affine_gate = 1e-3;          // else: relative RMS defect of the affine kappa fit
};

/// Extracts (ell*, alpha0) from the tail. Throws ExponentialTail when the tail is
/// not algebraic and InsufficientWindow when it spans fewer than `decades` decades.
RateFit fit_rate(const Trajectory& traj, const FitRateOptions& opts = {});

struct DecayClass {
    enum class Variant { Slow, FastEigen, FastOscillatory, FastResonant, Undetermined };
    Variant variant = Variant::Undetermined;
    std::optional<RateFit> rate_fit;
    Vec direction;                    // Slow and FastEigen
    double rate = 0.0;                // eigenvalue / envelope rate / resonant rate
    std::vector<double> frequencies;  // FastOscillatory
    std::vector<double> matched_beta; // nearest beta_i per frequency when a system is given
    nlohmann::json diagnostics = nlohmann::json::object();
    nlohmann::json to_json() const;
};

std::string_view to_string(DecayClass::Variant v);

/// Slow when fit_rate accepts the tail; otherwise dynamic mode decomposition on the
/// last half of a uniformly sampled run decides between the exponential alternatives.
DecayClass classify_decay(const Trajectory& traj, const LinearizedSystem* sys = nullptr,
                          const FitRateOptions& opts = {});

struct SecantReport {
    Vec theta_star;
    std::vector<double> t;
    std::vector<double> tail_arclength;  // sum of |delta secant| from t to the end
    std::vector<double> sigma_ratio;     // remaining path length / |y|
    double tail_oscillation = 0.0;       // max angle between the secant and theta* on the tail
    double tail_start = 0.0;
    std::optional<double> criticality_residual;
    std::optional<double> value_at_theta;
    nlohmann::json to_json() const;
};

/// Throws NonConvergentSecant when the tail oscillation exceeds tol.
SecantReport secant_analysis(const Trajectory& traj, const Potential* gp = nullptr, double tol = 1e-3);

struct RegionParams {
    double epsilon = 1.0;
    double r = 0.1;
    double omega = 0.1;
    double q = 2.0;
};

struct RegionMembership {
    bool in_W = false;
    bool in_W4 = false;
};

RegionMembership region_membership(const Potential& g, const Vec& y, const RegionParams& params);

struct ExponentSampling {
    double r = 0.1;
    double epsilon = 1.0;
    int n_samples = 20000;
    std::uint64_t seed = 0;
    double omega = 0.1;          // used for the support bands
    double axis_fraction = 0.5;  // share of samples concentrated near coordinate axes
    double min_share = 0.01;     // peak mass needed to report an exponent
};

struct CharacteristicExponent {
    double q = 0.0;
    Rational rational;
    double raw = 0.0;              // median of the cluster
    double support_fraction = 0.0; // share of W samples inside the W4 band of q
};

struct ExponentReport {
    std::vector<CharacteristicExponent> exponents;
    int in_region = 0;
    double unassigned_fraction = 0.0;
    long overlaps = 0;   // samples lying in two bands at once
    nlohmann::json to_json() const;
};

/// Throws EmptyRegion when no sampled point lies in W(epsilon, r).
ExponentReport characteristic_exponents(const Potential& g, const ExponentSampling& s);

struct GstarReport {
    std::vector<double> t;
    std::vector<double> gstar;
    std::vector<double> h;
    double alpha0 = 0.0;
    double burn_in_t = 0.0;
    long monotone_violations = 0;
    nlohmann::json to_json() const;
};

GstarReport monitor_gstar(const Trajectory& traj, const Potential& g, double ell_star, double omega_star,
                          std::optional<double> alpha0 = std::nullopt, double burn_in_decades = 1.0,
                          double slack = 1e-10);

enum class MzOutcome { Neutral, StableDominated, Violated };
std::string_view to_string(MzOutcome o);

struct MzResult {
    MzOutcome outcome = MzOutcome::Violated;
    double neutral_ratio = 0.0;  // max over tail of (X+ + X-)/X0
    double stable_ratio = 0.0;   // max over tail of (X+ + X0)/X-
    double rate = 0.0;           // log-linear slope of X+ + X0 + X- on the tail
    double bound_rate = 0.0;     // -b
    double t_lo = 0.0;
    nlohmann::json to_json() const;
};

MzResult mz_trichotomy(const std::vector<double>& t, const std::vector<double>& Xplus,
                       const std::vector<double>& Xzero, const std::vector<double>& Xminus, double b,
                       double threshold = 0.05);

struct A1A2Report {
    double D1 = 0.0;
    double D2 = 0.0;
    double alpha2 = 0.0;
    double bN_min = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    bool pass = false;
    std::string velocity_source;
    nlohmann::json to_json() const;
};

/// Throws RequiresTail when fewer than one decade of t >= 1 is available.
A1A2Report verify_A1_A2(const Trajectory& traj, const Potential& g, double rho, int N);

} // namespace thomlab
