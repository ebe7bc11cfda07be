#pragma once

#include "thomlab/error.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace thomlab {

/// One declared acceptance check on a dotted path into the results JSON.
struct CheckSpec {
    std::string metric;
    std::optional<double> approx;
    double rel_tol = 0.0;
    double abs_tol = 0.0;
    std::optional<double> min;
    std::optional<double> max;
    std::optional<std::string> equals;
};

struct CheckResult {
    CheckSpec spec;
    bool pass = false;
    nlohmann::json actual;
    std::string detail;
};

struct ScenarioResult {
    int exit_code = 0;              // 0 pass, 1 check failure, 2 config error, 3 numerical failure
    nlohmann::json results = nlohmann::json::object();
    std::vector<CheckResult> checks;
    std::vector<std::string> artifacts;
    std::string error;
};

/// Exit code for an error escaping a run: 2 for configuration and I/O problems, 3 otherwise.
int exit_code_for(const Error& e);
/// THOMLAB_WORKERS when set and positive, else 1.
int default_workers();

/// A TOML experiment description. kind is one of gradient, heavyball, pde, reduce, analyze, sweep.
class Scenario {
public:
    /// Parse errors and missing required files are reported as ConfigError with file:line.
    static Scenario load(const std::string& path);
    static Scenario from_string(const std::string& text, const std::string& base_dir,
                                const std::string& name = "<inline>");
    ~Scenario();
    Scenario(const Scenario&);
    Scenario& operator=(const Scenario&);
    Scenario(Scenario&&) noexcept;
    Scenario& operator=(Scenario&&) noexcept;

    std::string kind() const;
    const std::string& name() const;
    std::uint64_t seed() const;
    /// FNV-1a of the canonical TOML serialization.
    std::string hash() const;
    std::vector<CheckSpec> checks() const;

    /// Throws ConfigError naming the offending field and line.
    void validate() const;
    /// Copy with one dotted key replaced (JSON scalar or array of scalars).
    Scenario with_override(const std::string& dotted_key, const nlohmann::json& value) const;

    /// Runs the scenario and writes artifacts under out_dir (created if needed). Never throws
    /// for numerical failures; they are reported through exit_code and error.
    ScenarioResult run(const std::string& out_dir, int workers = 1) const;

private:
    struct Impl;
    explicit Scenario(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

/// Evaluates checks against a results document.
std::vector<CheckResult> evaluate_checks(const std::vector<CheckSpec>& specs, const nlohmann::json& results);

} // namespace thomlab
