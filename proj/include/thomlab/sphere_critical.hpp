#pragma once

#include "thomlab/potential.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace thomlab {

/// Critical point of the restriction of a homogeneous polynomial to the unit sphere.
struct CriticalPoint {
    Vec direction;
    double value = 0.0;
    double residual = 0.0;          // |spherical gradient| at direction
    std::optional<int> orbit_id;    // shared by points on one curve of critical points
};

struct CriticalSearchOptions {
    int n_starts = 200;
    double tol = 1e-9;
    std::uint64_t seed = 0;
    double dedup_angle = 1e-6;
    // Continuation step along degenerate directions and the minimum size of an orbit cluster.
    double trace_step = 0.05;
    int orbit_min_points = 10;
};

/// Multi-start projected Newton on the sphere with a descent fallback, then
/// deduplication and orbit detection. Sorted by value, then lexicographically
/// by direction. Returns an empty list when nothing converges.
std::vector<CriticalPoint> critical_points(const Potential& gp, const CriticalSearchOptions& opts = {});
std::vector<CriticalPoint> critical_points(const Potential& gp, int n_starts, double tol, std::uint64_t seed);

nlohmann::json to_json(const std::vector<CriticalPoint>& pts);

enum class AdamsSimon { Positive, NonnegativeOnly, Fails };

struct AdamsSimonMode {
    bool elliptic = false;
    double m = 0.0;
    static AdamsSimonMode parabolic() { return {}; }
    static AdamsSimonMode elliptic_with(double m) { return {true, m}; }
};

struct AdamsSimonResult {
    AdamsSimon verdict = AdamsSimon::Fails;
    double best_value = 0.0;      // largest critical value of the mode-scaled function
    std::optional<Vec> witness;   // critical direction attaining best_value
    std::string diagnostic;
};

AdamsSimonResult adams_simon(const Potential& gp, AdamsSimonMode mode, double tol = 1e-9,
                             const CriticalSearchOptions& opts = {});

std::string_view to_string(AdamsSimon v);

/// x(t) = (beta0 p (p-2) t)^{-1/(p-2)} w with beta0 = gp(w) for unit w.
/// Throws InvalidArgument when beta0 <= 0, p == 2, or t <= 0.
Vec ansatz_solution(const Potential& gp, const Vec& w, double t);

} // namespace thomlab
