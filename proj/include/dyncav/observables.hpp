// Bogoliubov post-processing of an evolution state: the (Xi, H) frame, the
// particle spectrum N_n, the total energy and the truncated-unitarity defect.
//
//   Xi = D+ xi + D- eta,  H = D- xi + D+ eta,  D+- = (1 +- l(t)/l0) / 2
//   N_n = (Omega_n(t)/4) sum_m |H_nm|^2 / Omega_m^0
//   E   = sum_n Omega_n(t) N_n
//   defect = max_n | (Omega_n(t)/4) sum_m (|Xi_nm|^2 - |H_nm|^2)/Omega_m^0 - 1 |
//
// Evaluating mid-motion treats the instantaneous length as if the wall froze
// there; at times with l = l0 the frame reduces to (xi, eta) exactly.

#pragma once

#include <optional>
#include <vector>

#include "cavity.hpp"
#include "coupling.hpp"
#include "evolve.hpp"

namespace dyncav {

struct BogoliubovFrame {
    double t1 = 0.0;
    MatrixXcd Xi;
    MatrixXcd H;
    VectorXd omega0; // Omega_m^0 = m pi / l0
    VectorXd omega1; // Omega_n^1 = n pi / l(t1)
    double delta_plus = 1.0;
    double delta_minus = 0.0;
};

// When whole_period is set the instantaneous length is ignored and the frame
// is taken at l = l0 (valid at whole periods, where D+ = 1 and D- = 0; then
// H is just eta).
inline BogoliubovFrame bogoliubov_frame(const EvolutionState& state, const CavityMotion& motion,
                                        bool whole_period = false) {
    const auto K = state.xi.rows();
    const double l = whole_period ? motion.l0 : sample_trajectory(motion, state.t).l;

    BogoliubovFrame f;
    f.t1 = state.t;
    f.delta_plus = 0.5 * (1.0 + l / motion.l0);
    f.delta_minus = 0.5 * (1.0 - l / motion.l0);
    f.Xi = f.delta_plus * state.xi + f.delta_minus * state.eta;
    f.H = f.delta_minus * state.xi + f.delta_plus * state.eta;
    f.omega0.resize(K);
    f.omega1.resize(K);
    for (Eigen::Index n = 0; n < K; ++n) {
        f.omega0[n] = (n + 1) * pi / motion.l0;
        f.omega1[n] = (n + 1) * pi / l;
    }
    return f;
}

struct ParticleSpectrum {
    double t = 0.0;
    VectorXd N;                   // per-mode particle numbers, modes 1..k_max
    double total = 0.0;           // sum_n N_n
    double energy = 0.0;          // sum_n Omega_n^1 N_n
    double unitarity_defect = 0.0;
};

inline ParticleSpectrum particle_spectrum(const BogoliubovFrame& frame) {
    const auto K = frame.H.rows();
    ParticleSpectrum sp;
    sp.t = frame.t1;
    sp.N.resize(K);
    for (Eigen::Index n = 0; n < K; ++n) {
        double h2 = 0.0, x2 = 0.0;
        for (Eigen::Index m = 0; m < K; ++m) {
            h2 += std::norm(frame.H(n, m)) / frame.omega0[m];
            x2 += std::norm(frame.Xi(n, m)) / frame.omega0[m];
        }
        const double w = 0.25 * frame.omega1[n];
        sp.N[n] = w * h2;
        sp.total += sp.N[n];
        sp.energy += frame.omega1[n] * sp.N[n];
        sp.unitarity_defect = std::max(sp.unitarity_defect, std::abs(w * (x2 - h2) - 1.0));
    }
    return sp;
}

struct SelectionRuleReport {
    bool applicable = false;
    std::vector<int> suppressed_modes; // k = 2 n p within the truncation
    double max_suppressed = 0.0;       // max N_k over those modes
    double max_overall = 0.0;          // max N_k over all modes
    double ratio = 0.0;                // max_suppressed / max_overall (0 if empty)
};

// The drive index n forbids production in modes k = 2 n p, p = 1, 2, ...
// Only meaningful when 2n is a positive integer.
inline SelectionRuleReport selection_rule_check(const ParticleSpectrum& spectrum,
                                                double resonance_index) {
    SelectionRuleReport rep;
    const double two_n = 2.0 * resonance_index;
    const double rounded = std::round(two_n);
    if (!(two_n > 0.0) || std::abs(two_n - rounded) > 1e-9)
        return rep; // not applicable
    rep.applicable = true;
    const int stride = static_cast<int>(rounded);
    const int K = static_cast<int>(spectrum.N.size());
    rep.max_overall = K > 0 ? spectrum.N.maxCoeff() : 0.0;
    for (int k = stride; k <= K; k += stride) {
        rep.suppressed_modes.push_back(k);
        rep.max_suppressed = std::max(rep.max_suppressed, spectrum.N[k - 1]);
    }
    if (!rep.suppressed_modes.empty() && rep.max_overall > 0.0)
        rep.ratio = rep.max_suppressed / rep.max_overall;
    return rep;
}

} // namespace dyncav
