#pragma once

#include "thomlab/pde_spectral.hpp"
#include "thomlab/potential.hpp"
#include "thomlab/sphere_critical.hpp"

#include <map>
#include <optional>
#include <vector>

#include "json.hpp"

namespace thomlab {

struct ReductionSettings {
    int K = 32;
    double gap_tol = 1e-8;   // eigenvalues below this in modulus span the kernel
    double tol = 1e-13;      // Newton residual on the complement
    int max_iter = 50;
    double rho = 0.3;        // trust radius in kernel coordinates
};

/// Lyapunov-Schmidt reduction of the model PDE, in the orthonormal mode coordinates xi of
/// project_modes (const, cos1, sin1, ...). Kernel coordinates are x = (xi_cos1, xi_sin1).
class ReducedModel {
public:
    explicit ReducedModel(PdeModel model, ReductionSettings settings = {});

    int dim() const { return static_cast<int>(lambda_.size()); }
    int kernel_dim() const { return static_cast<int>(kernel_.size()); }
    const std::vector<int>& kernel_indices() const { return kernel_; }
    /// Columns are the kernel modes as unit vectors in xi coordinates.
    Mat kernel_basis() const;
    const Vec& eigenvalues() const { return lambda_; }
    const PdeModel& model() const { return model_; }
    const ReductionSettings& settings() const { return settings_; }

    /// M(u) = u_thth + u + s u^3 in xi coordinates.
    Vec M(const Vec& xi) const;
    /// F(u) = int (u_th^2/2 - u^2/2 - s u^4/4).
    double energy(const Vec& xi) const;
    /// Embeds kernel coordinates into xi coordinates.
    Vec embed(const Vec& v) const;

    /// H(v) in xi coordinates (zero on the kernel). NoConvergence for |v| > rho or a stalled
    /// Newton iteration; SingularJacobian when the complement Jacobian is singular.
    Vec solve_H(const Vec& v) const;
    double reduced_value(const Vec& v) const;
    /// grad f(v) = -P_ker M(v + H(v)).
    Vec reduced_gradient(const Vec& v) const;
    /// Norm of the complement residual at v + H(v).
    double complement_residual(const Vec& v) const;

private:
    PdeModel model_;
    ReductionSettings settings_;
    Vec lambda_;
    std::vector<int> kernel_;
    std::vector<int> complement_;
    Mat basis_;   // eigenfunction values on the quadrature grid
    double weight_ = 0.0;
};

struct ReducedFit {
    std::optional<int> p;          // lowest degree with coefficient norm above 1e-8
    Potential f{2, {}};            // all fitted degrees
    Potential f_p{2, {}};          // leading homogeneous part (zero when p is empty)
    std::map<int, double> degree_norms;
    double residual = 0.0;         // max relative misfit over samples
    double condition = 0.0;        // of the column-scaled design matrix
    std::vector<double> radii;
    int n_directions = 0;
    int max_degree = 0;
    nlohmann::json to_json() const;
};

/// Least-squares fit of f over circles of the given radii; throws DegenerateFit when the
/// scaled design matrix is ill-conditioned.
ReducedFit fit_reduced_polynomial(const ReducedModel& model, const std::vector<double>& radii = {0.02, 0.04, 0.08},
                                  int n_directions = 32, int max_degree = 7);

AdamsSimonResult adams_simon_from_reduction(const ReducedFit& fit);

} // namespace thomlab
