#pragma once

#include "thomlab/potential.hpp"

#include <complex>
#include <string_view>
#include <vector>

namespace thomlab {

/// Which of the four index sets an eigenvalue lambda_i of A falls into.
enum class IndexSet { I1, I2, I3, I4 };

/// Labels of the psi-basis vectors and of the matching coefficients.
enum class PsiKind { Xi1, Xi2, Xi3, Xi4, Plus, Minus };

struct PsiVector {
    int index = 0;     // eigenpair index i
    PsiKind kind = PsiKind::Plus;
    Vec psi;           // length 2n
};

/// Finite-dimensional vectorization of the second-order problem
/// u'' - m u' + A u = 0 written on q = (u, u' - (m/2) u).
struct LinearizedSystem {
    Mat A;
    double m = 0.0;
    Vec lambda;                    // eigenvalues of A, ascending
    Mat phi;                       // orthonormal eigenvectors (columns)
    std::vector<IndexSet> index_set;
    std::vector<std::complex<double>> gamma_plus;
    std::vector<std::complex<double>> gamma_minus;
    std::vector<double> beta;      // sqrt(lambda - m^2/4) on I1, 0 elsewhere
    Mat L;                         // 2n x 2n operator
    Mat G;                         // 2n x 2n Gram matrix
    Mat L_adjoint;                 // G^{-1} L^T G
    std::vector<PsiVector> psi;

    int n() const { return static_cast<int>(lambda.size()); }
    std::vector<int> indices(IndexSet s) const;
};

/// Residuals of the structural identities, all expected at round-off level.
struct VectorizationCheck {
    double gram_identity = 0.0;    // max |G(psi_a, psi_b) - delta_ab|
    double l_action = 0.0;         // max residual of L psi relations
    double adjoint_action = 0.0;   // max residual of L^dagger psi relations
    double g_positive_min = 0.0;   // smallest eigenvalue of G
};

/// Builds L, G, the psi-basis and the index partition. Eigenvalues within
/// zero_tol * max(1, |A|) of 0 or of m^2/4 are snapped to those values.
LinearizedSystem vectorize(const Mat& A, double m, double zero_tol = 1e-10);

VectorizationCheck check_vectorization(const LinearizedSystem& sys);

struct Coefficient {
    int index = 0;
    PsiKind kind = PsiKind::Plus;
    double value = 0.0;
};

struct CoefficientRecord {
    std::vector<Coefficient> entries;
    Vec q;                // (u, udot - (m/2) u)
    double reconstruction_error = 0.0;
    double value(int index, PsiKind kind) const;
};

CoefficientRecord project_coefficients(const LinearizedSystem& sys, const Vec& u, const Vec& udot);

std::string_view to_string(IndexSet s);
std::string_view to_string(PsiKind k);

} // namespace thomlab
