#pragma once

#include "thomlab/flow.hpp"
#include "thomlab/pde_spectral.hpp"

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

namespace thomlab {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Shortest representation that reads back to the same double.
std::string format_double(double x);
/// 64-bit FNV-1a, as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

/// Identifies the producing configuration inside every artifact.
struct Provenance {
    std::string config_hash = "none";
    std::uint64_t seed = 0;
    std::string comment_line() const;   // "# thomlab <version> config=<hash> seed=<seed>"
    nlohmann::json to_json() const;
};

/// Header t,y_1..y_n[,v_1..v_n],norm_y,g_y. g_y is empty when no potential is given.
void write_trajectory_csv(const std::string& path, const Trajectory& traj, const Potential* g, const Provenance& prov);
/// Reads the format above, ignoring '#' lines; norm_y and g_y are recomputed downstream.
Trajectory read_trajectory_csv(const std::string& path);

/// Header t,norm_L2,x1,x2,F_u,Xplus,Xzero,Xminus.
void write_pde_series_csv(const std::string& path, const PdeRun& run, const Provenance& prov);
struct PdeSeries {
    std::vector<double> t, norm, x1, x2, F, Xplus, Xzero, Xminus;
};
PdeSeries read_pde_series_csv(const std::string& path);
/// Header k,Re,Im.
void write_snapshot_csv(const std::string& path, const SpectralState& s, const Provenance& prov);

void write_text(const std::string& path, const std::string& content);
void write_json(const std::string& path, nlohmann::json j, const Provenance& prov);

} // namespace thomlab
