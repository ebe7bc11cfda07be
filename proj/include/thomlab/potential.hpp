#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace thomlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One monomial c * y_1^e_1 ... y_n^e_n.
struct Term {
    std::vector<int> exps;
    double coef = 0.0;

    int degree() const;
    bool operator==(const Term&) const = default;
};

/// Exact multivariate polynomial in n real variables.
///
/// Terms are kept canonical: no duplicate multi-indices, no zero
/// coefficients, graded lexicographic order (total degree ascending, then
/// exponent vectors in descending lexicographic order so y_1 leads).
/// Values are immutable after construction.
class Potential {
public:
    Potential() = default;
    Potential(int n, std::vector<Term> terms, std::string label = {});

    int dimension() const { return n_; }
    const std::vector<Term>& terms() const { return terms_; }
    const std::string& label() const { return label_; }
    Potential with_label(std::string label) const;

    bool is_zero() const { return terms_.empty(); }
    int max_degree() const;
    /// True when every term has the same total degree (the zero polynomial counts).
    bool is_homogeneous() const;
    /// Degree of a homogeneous potential; throws when not homogeneous or zero.
    int homogeneous_degree() const;

    double eval(const Vec& y) const;
    Vec grad(const Vec& y) const;
    Mat hessian(const Vec& y) const;

    /// Split by total degree. Throws NotFlowPotential when a constant or
    /// degree-one term is present.
    std::map<int, Potential> homogeneous_components() const;
    /// Smallest degree with a nonzero component (the order of integrability
    /// when the polynomial is a reduced functional).
    int order_p() const;
    /// Leading homogeneous part g_p.
    Potential leading_part() const;

    /// d/dr g = <grad g(y), y>/|y|.
    double radial_derivative(const Vec& y) const;
    /// grad g - (d/dr g) y/|y|, orthogonal to y.
    Vec spherical_gradient(const Vec& y) const;
    /// G_q(y) = g(y)/|y|^q.
    double normalized_value(const Vec& y, double q) const;

    Potential operator-() const;
    Potential scaled(double c) const;
    friend Potential operator+(const Potential& a, const Potential& b);
    friend Potential operator*(const Potential& a, const Potential& b);
    friend Potential operator*(double c, const Potential& a) { return a.scaled(c); }

    bool operator==(const Potential& other) const {
        return n_ == other.n_ && terms_ == other.terms_;
    }

    nlohmann::json to_json() const;
    static Potential from_json(const nlohmann::json& j);
    static Potential load(const std::string& path);
    void save(const std::string& path) const;

    // Factories used across the project and its scenarios.
    static Potential monomial(int n, std::vector<int> exps, double coef);
    static Potential coordinate(int n, int i);
    /// (y_1^2 + ... + y_n^2)^k scaled by c.
    static Potential norm_power(int n, int k, double c = 1.0);
    /// sum_i lambda_i y_i^2 / 2.
    static Potential diagonal_quadratic(const std::vector<double>& lambda);
    /// (8/3) x1^3 + sqrt(2) (x1 + x2) x3^2 + (8/3) x2^3.
    static Potential bubble_sheet();

private:
    void check_dim(const Vec& y) const;

    int n_ = 0;
    std::vector<Term> terms_;
    std::string label_;
};

} // namespace thomlab
