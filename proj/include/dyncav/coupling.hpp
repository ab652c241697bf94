// Intermode coupling of the truncated mode hierarchy and the right-hand side
// of the first-order evolution system
//
//   xi_k'  = -i (a+_kk xi_k - a-_kk eta_k) - sum_n (c-_kn xi_n + c+_kn eta_n)
//   eta_k' = -i (a-_kk xi_k - a+_kk eta_k) - sum_n (c+_kn xi_n + c-_kn eta_n)
//
// with a+-_kk = (k pi / 2 l0) (1 +- (l0/l)^2) and
// c+-_kn = gamma (-1)^(n+k) n/(k +- n) for n != k, zero on the diagonal.
// The c matrices are gamma(t) times a constant stencil, precomputed once per
// truncation, so a RHS evaluation costs O(k_max^2) with no transcendentals
// beyond the trajectory sample.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>

#include "cavity.hpp"

namespace dyncav {

using Eigen::MatrixXd;
using Eigen::MatrixXcd;
using Eigen::VectorXd;
using Eigen::VectorXcd;
using cplx = std::complex<double>;

struct Truncation {
    int k_max = 1;

    void validate() const {
        if (k_max < 1)
            throw std::invalid_argument("Truncation: k_max must be >= 1");
    }
};

// Antisymmetric velocity coupling M_nm = gamma (-1)^(n+m) 2nm/(m^2-n^2),
// M_nn = 0.
inline double coupling_matrix_entry(const CavityMotion& motion, int n, int m, double t) {
    if (n < 1 || m < 1)
        throw std::invalid_argument("coupling_matrix_entry: mode indices must be >= 1");
    if (n == m)
        return 0.0;
    const double gamma = sample_trajectory(motion, t).gamma;
    const double nn = n, mm = m;
    const double sign = ((n + m) % 2 == 0) ? 1.0 : -1.0;
    return gamma * sign * 2.0 * nn * mm / (mm * mm - nn * nn);
}

// Constant stencils: c^- = gamma * minus, c^+ = gamma * plus, and the
// unnormalized M stencil (M = gamma * m_hat).
struct CouplingStencils {
    MatrixXd minus; // (-1)^(n+k) n/(k-n), row k, col n (both 1-based modes)
    MatrixXd plus;  // (-1)^(n+k) n/(k+n)
    MatrixXd m_hat; // (-1)^(n+m) 2nm/(m^2-n^2), row n, col m

    explicit CouplingStencils(const Truncation& trunc) {
        trunc.validate();
        const int K = trunc.k_max;
        minus.setZero(K, K);
        plus.setZero(K, K);
        m_hat.setZero(K, K);
        for (int k = 1; k <= K; ++k) {
            for (int n = 1; n <= K; ++n) {
                if (n == k)
                    continue;
                const double sign = ((n + k) % 2 == 0) ? 1.0 : -1.0;
                const double nn = n, kk = k;
                minus(k - 1, n - 1) = sign * nn / (kk - nn);
                plus(k - 1, n - 1) = sign * nn / (kk + nn);
                m_hat(k - 1, n - 1) = sign * 2.0 * kk * nn / (nn * nn - kk * kk);
            }
        }
    }
};

// Snapshot of all coefficients at one time, mainly for tests and the
// reference integrators; the production RHS uses the stencils directly.
struct CouplingCoefficients {
    double t = 0.0;
    double gamma = 0.0;
    VectorXd a_plus;  // (k pi / 2 l0) (1 + (l0/l)^2)
    VectorXd a_minus; // (k pi / 2 l0) (1 - (l0/l)^2)
    MatrixXd c_plus;
    MatrixXd c_minus;
};

inline void diagonal_frequencies(const CavityMotion& motion, int k_max, double l,
                                 VectorXd& a_plus, VectorXd& a_minus) {
    const double r2 = (motion.l0 / l) * (motion.l0 / l);
    a_plus.resize(k_max);
    a_minus.resize(k_max);
    for (int k = 1; k <= k_max; ++k) {
        const double base = k * pi / (2.0 * motion.l0);
        a_plus[k - 1] = base * (1.0 + r2);
        a_minus[k - 1] = base * (1.0 - r2);
    }
}

inline CouplingCoefficients coefficients_at(const CavityMotion& motion, const Truncation& trunc,
                                            double t) {
    motion.validate();
    const CouplingStencils st(trunc);
    const TrajectorySample s = sample_trajectory(motion, t);

    CouplingCoefficients out;
    out.t = t;
    out.gamma = s.gamma;
    diagonal_frequencies(motion, trunc.k_max, s.l, out.a_plus, out.a_minus);
    out.c_minus = s.gamma * st.minus;
    out.c_plus = s.gamma * st.plus;
    return out;
}

// Complex single-column RHS.  The production integrator uses an equivalent
// all-columns formulation; this one is the reference the tests exercise.
inline void rhs(const CouplingCoefficients& co, const VectorXcd& xi, const VectorXcd& eta,
                VectorXcd& dxi, VectorXcd& deta) {
    const auto K = co.a_plus.size();
    if (xi.size() != K || eta.size() != K)
        throw std::invalid_argument("rhs: column dimension does not match truncation");
    const cplx mi(0.0, -1.0);
    const VectorXcd ap = co.a_plus.cast<cplx>();
    const VectorXcd am = co.a_minus.cast<cplx>();
    dxi = mi * (ap.cwiseProduct(xi) - am.cwiseProduct(eta)) - (co.c_minus * xi + co.c_plus * eta);
    deta = mi * (am.cwiseProduct(xi) - ap.cwiseProduct(eta)) - (co.c_plus * xi + co.c_minus * eta);
}

} // namespace dyncav
