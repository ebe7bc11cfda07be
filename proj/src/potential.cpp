#include "thomlab/potential.hpp"

#include "thomlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace thomlab {

namespace {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

double ipow(double x, int e) {
    double r = 1.0;
    while (e > 0) {
        if (e & 1) r *= x;
        x *= x;
        e >>= 1;
    }
    return r;
}

bool grlex_less(const Term& a, const Term& b) {
    const int da = a.degree();
    const int db = b.degree();
    if (da != db) return da < db;
    return std::lexicographical_compare(b.exps.begin(), b.exps.end(), a.exps.begin(), a.exps.end());
}

} // namespace

int Term::degree() const { return std::accumulate(exps.begin(), exps.end(), 0); }

Potential::Potential(int n, std::vector<Term> terms, std::string label)
    : n_(n), label_(std::move(label)) {
    if (n <= 0) throw Error(ErrorKind::InvalidArgument, "potential dimension must be positive");
    for (const auto& t : terms) {
        if (static_cast<int>(t.exps.size()) != n) {
            throw Error(ErrorKind::DimensionMismatch, "multi-index length differs from dimension");
        }
        for (int e : t.exps) {
            if (e < 0) throw Error(ErrorKind::InvalidArgument, "negative exponent");
        }
        if (!std::isfinite(t.coef)) throw Error(ErrorKind::InvalidArgument, "non-finite coefficient");
    }
    std::sort(terms.begin(), terms.end(), grlex_less);
    for (auto& t : terms) {
        if (!terms_.empty() && terms_.back().exps == t.exps) {
            terms_.back().coef += t.coef;
        } else {
            terms_.push_back(std::move(t));
        }
    }
    std::erase_if(terms_, [](const Term& t) { return t.coef == 0.0; });
}

Potential Potential::with_label(std::string label) const {
    Potential p = *this;
    p.label_ = std::move(label);
    return p;
}

int Potential::max_degree() const {
    int d = 0;
    for (const auto& t : terms_) d = std::max(d, t.degree());
    return d;
}

bool Potential::is_homogeneous() const {
    if (terms_.empty()) return true;
    const int d = terms_.front().degree();
    return std::all_of(terms_.begin(), terms_.end(), [d](const Term& t) { return t.degree() == d; });
}

int Potential::homogeneous_degree() const {
    if (terms_.empty() || !is_homogeneous()) {
        throw Error(ErrorKind::InvalidArgument, "potential is not a nonzero homogeneous polynomial");
    }
    return terms_.front().degree();
}

void Potential::check_dim(const Vec& y) const {
    if (y.size() != n_) {
        throw Error(ErrorKind::DimensionMismatch,
                    "expected vector of length " + std::to_string(n_) + ", got " + std::to_string(y.size()));
    }
}

double Potential::eval(const Vec& y) const {
    check_dim(y);
    CompensatedSum s;
    for (const auto& t : terms_) {
        double v = t.coef;
        for (int i = 0; i < n_; ++i) v *= ipow(y[i], t.exps[i]);
        s.add(v);
    }
    return s.value();
}

Vec Potential::grad(const Vec& y) const {
    check_dim(y);
    std::vector<CompensatedSum> s(n_);
    for (const auto& t : terms_) {
        for (int i = 0; i < n_; ++i) {
            if (t.exps[i] == 0) continue;
            double v = t.coef * t.exps[i];
            for (int j = 0; j < n_; ++j) v *= ipow(y[j], j == i ? t.exps[j] - 1 : t.exps[j]);
            s[i].add(v);
        }
    }
    Vec g(n_);
    for (int i = 0; i < n_; ++i) g[i] = s[i].value();
    return g;
}

Mat Potential::hessian(const Vec& y) const {
    check_dim(y);
    Mat h = Mat::Zero(n_, n_);
    std::vector<int> e(n_);
    for (int a = 0; a < n_; ++a) {
        for (int b = a; b < n_; ++b) {
            CompensatedSum s;
            for (const auto& t : terms_) {
                e = t.exps;
                double v = t.coef * e[a];
                if (v == 0.0) continue;
                --e[a];
                v *= e[b];
                if (v == 0.0) continue;
                --e[b];
                for (int j = 0; j < n_; ++j) v *= ipow(y[j], e[j]);
                s.add(v);
            }
            h(a, b) = s.value();
            h(b, a) = h(a, b);
        }
    }
    return h;
}

std::map<int, Potential> Potential::homogeneous_components() const {
    std::map<int, std::vector<Term>> by_degree;
    for (const auto& t : terms_) {
        const int d = t.degree();
        if (d < 2) {
            throw Error(ErrorKind::NotFlowPotential,
                        "potential has a nonzero constant or linear term (need g(0)=0, grad g(0)=0)");
        }
        by_degree[d].push_back(t);
    }
    std::map<int, Potential> out;
    for (auto& [d, ts] : by_degree) out.emplace(d, Potential(n_, std::move(ts), label_));
    return out;
}

int Potential::order_p() const {
    const auto comps = homogeneous_components();
    if (comps.empty()) throw Error(ErrorKind::NotFlowPotential, "zero potential has no order");
    return comps.begin()->first;
}

Potential Potential::leading_part() const {
    const auto comps = homogeneous_components();
    if (comps.empty()) throw Error(ErrorKind::NotFlowPotential, "zero potential has no leading part");
    return comps.begin()->second;
}

double Potential::radial_derivative(const Vec& y) const {
    check_dim(y);
    const double r = y.norm();
    if (r == 0.0) throw Error(ErrorKind::InvalidArgument, "radial derivative undefined at y = 0");
    return grad(y).dot(y) / r;
}

Vec Potential::spherical_gradient(const Vec& y) const {
    check_dim(y);
    const double r = y.norm();
    if (r == 0.0) throw Error(ErrorKind::InvalidArgument, "spherical gradient undefined at y = 0");
    const Vec u = y / r;
    const Vec g = grad(y);
    Vec s = g - g.dot(u) * u;
    // One re-orthogonalization pass removes the residual radial component.
    s -= s.dot(u) * u;
    return s;
}

double Potential::normalized_value(const Vec& y, double q) const {
    check_dim(y);
    const double r = y.norm();
    if (r == 0.0) throw Error(ErrorKind::InvalidArgument, "G_q undefined at y = 0");
    if (!(q > 0.0)) throw Error(ErrorKind::InvalidArgument, "q must be positive");
    return eval(y) / std::pow(r, q);
}

Potential Potential::operator-() const { return scaled(-1.0); }

Potential Potential::scaled(double c) const {
    std::vector<Term> ts = terms_;
    for (auto& t : ts) t.coef *= c;
    return Potential(n_, std::move(ts), label_);
}

Potential operator+(const Potential& a, const Potential& b) {
    if (a.n_ != b.n_) throw Error(ErrorKind::DimensionMismatch, "adding potentials of different dimension");
    std::vector<Term> ts = a.terms_;
    ts.insert(ts.end(), b.terms_.begin(), b.terms_.end());
    return Potential(a.n_, std::move(ts), a.label_);
}

Potential operator*(const Potential& a, const Potential& b) {
    if (a.n_ != b.n_) throw Error(ErrorKind::DimensionMismatch, "multiplying potentials of different dimension");
    std::vector<Term> ts;
    ts.reserve(a.terms_.size() * b.terms_.size());
    for (const auto& ta : a.terms_) {
        for (const auto& tb : b.terms_) {
            Term t{ta.exps, ta.coef * tb.coef};
            for (int i = 0; i < a.n_; ++i) t.exps[i] += tb.exps[i];
            ts.push_back(std::move(t));
        }
    }
    return Potential(a.n_, std::move(ts), a.label_);
}

nlohmann::json Potential::to_json() const {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : terms_) terms.push_back({{"exps", t.exps}, {"coef", t.coef}});
    return {{"n", n_}, {"terms", terms}, {"label", label_}};
}

Potential Potential::from_json(const nlohmann::json& j) {
    try {
        const int n = j.at("n").get<int>();
        std::vector<Term> ts;
        for (const auto& jt : j.at("terms")) {
            ts.push_back(Term{jt.at("exps").get<std::vector<int>>(), jt.at("coef").get<double>()});
        }
        return Potential(n, std::move(ts), j.value("label", std::string{}));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("malformed potential JSON: ") + e.what());
    }
}

Potential Potential::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open potential file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, path + ": " + e.what());
    }
    return from_json(j);
}

void Potential::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << to_json().dump(2) << '\n';
}

Potential Potential::monomial(int n, std::vector<int> exps, double coef) {
    return Potential(n, {Term{std::move(exps), coef}});
}

Potential Potential::coordinate(int n, int i) {
    std::vector<int> e(n, 0);
    e.at(i) = 1;
    return monomial(n, std::move(e), 1.0);
}

Potential Potential::norm_power(int n, int k, double c) {
    Potential sq(n, {});
    for (int i = 0; i < n; ++i) {
        std::vector<int> e(n, 0);
        e[i] = 2;
        sq = sq + monomial(n, e, 1.0);
    }
    Potential out = monomial(n, std::vector<int>(n, 0), c);
    for (int j = 0; j < k; ++j) out = out * sq;
    return out;
}

Potential Potential::diagonal_quadratic(const std::vector<double>& lambda) {
    const int n = static_cast<int>(lambda.size());
    std::vector<Term> ts;
    for (int i = 0; i < n; ++i) {
        std::vector<int> e(n, 0);
        e[i] = 2;
        ts.push_back(Term{e, lambda[i] / 2.0});
    }
    return Potential(n, std::move(ts), "diagonal_quadratic");
}

Potential Potential::bubble_sheet() {
    const double s2 = std::sqrt(2.0);
    return Potential(3,
                     {Term{{3, 0, 0}, 8.0 / 3.0}, Term{{1, 0, 2}, s2}, Term{{0, 1, 2}, s2},
                      Term{{0, 3, 0}, 8.0 / 3.0}},
                     "bubble_sheet");
}

} // namespace thomlab
