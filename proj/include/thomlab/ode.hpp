#pragma once

#include "thomlab/potential.hpp"

#include <functional>
#include <vector>

namespace thomlab {

/// Step-size and output controls for the embedded 5(4) integrator.
struct OdeControl {
    double rtol = 1e-9;
    double atol = 1e-12;
    double h_init = 0.0;          // 0 picks a starting step automatically
    long max_steps = 20'000'000;
    // Integrate in s = ln t once t >= 1 (forward runs only).
    bool log_time = true;
    // Geometric output grid: samples per decade of t, starting no earlier than t_min_sample.
    int samples_per_decade = 25;
    double t_min_sample = 1e-3;
    // When positive, output is sampled on the uniform grid t0 + k*uniform_dt instead.
    double uniform_dt = 0.0;
};

using OdeRhs = std::function<void(double t, const Vec& y, Vec& dydt)>;
/// Called on every accepted step with the real time; may throw to abort.
using StepObserver = std::function<void(double t, const Vec& y)>;

struct OdeOutput {
    std::vector<double> t;
    std::vector<Vec> y;
    long steps = 0;
    long rejected = 0;
};

/// Output sample times between t0 and t1 (inclusive) under ctrl's sampling policy.
std::vector<double> output_grid(double t0, double t1, const OdeControl& ctrl);

/// Dormand-Prince 5(4) with PI-free classic step control. Supports t1 < t0
/// (backward integration, always in plain t). Throws StiffnessFailure on step
/// underflow or when max_steps is exhausted.
OdeOutput integrate_ode(const OdeRhs& rhs, const Vec& y0, double t0, double t1, const OdeControl& ctrl,
                        const StepObserver& observer = {});

} // namespace thomlab
