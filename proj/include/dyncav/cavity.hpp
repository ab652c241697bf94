// Prescribed boundary trajectories l(t) of the vibrating cavity and the
// quantities derived from them (instantaneous eigenfrequencies, detuning).
//
// The cavity occupies [0, l(t)] with l(t) = l0 * (1 + epsilon * delta(t)).
// Three closed-form motion kinds are supported:
//   kind 1 : delta = sin(w t)
//   kind 2 : delta = 1 - cos(w t)      (smooth start, l(0)=l0, l'(0)=0)
//   kind 3 : delta = sin^3(w t)
// where w is the cavity drive frequency.  All derivatives are exact closed
// forms; no finite differencing is ever used here.  Natural units hbar=c=1.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace dyncav {

inline constexpr double pi = 3.14159265358979323846;

enum class Drive {
    standard,        // w_cav = 2 n pi / l0
    true_resonance,  // w_cav = 2 n pi / (l0 (1+eps)); kind 2 only
    explicit_freq,   // w_cav given by the user
};

struct CavityMotion {
    double l0 = 1.0;              // cavity size at rest
    double epsilon = 0.0;         // dimensionless vibration amplitude
    int kind = 1;                 // motion kind, 1..3
    double resonance_index = 1.0; // n; may be non-integer (e.g. 1.5)
    Drive drive = Drive::standard;
    double omega_explicit = 0.0;  // used when drive == explicit_freq

    void validate() const {
        if (!(l0 > 0.0))
            throw std::invalid_argument("CavityMotion: l0 must be > 0");
        if (!(epsilon >= 0.0 && epsilon < 0.5))
            throw std::invalid_argument("CavityMotion: epsilon must be in [0, 0.5)");
        if (kind < 1 || kind > 3)
            throw std::invalid_argument("CavityMotion: kind must be 1, 2 or 3");
        if (!(resonance_index > 0.0))
            throw std::invalid_argument("CavityMotion: resonance_index must be > 0");
        if (drive == Drive::true_resonance && kind != 2)
            throw std::invalid_argument("CavityMotion: true_resonance drive requires kind 2");
        if (drive == Drive::explicit_freq && !(omega_explicit > 0.0))
            throw std::invalid_argument("CavityMotion: explicit drive frequency must be > 0");
    }

    // Drive frequency w_cav (the fundamental frequency of l(t)).
    double omega_cav() const {
        switch (drive) {
        case Drive::standard:
            return 2.0 * resonance_index * pi / l0;
        case Drive::true_resonance:
            return 2.0 * resonance_index * pi / (l0 * (1.0 + epsilon));
        case Drive::explicit_freq:
            return omega_explicit;
        }
        return 0.0; // unreachable
    }

    double period() const { return 2.0 * pi / omega_cav(); }

    // Unperturbed mode frequency Omega_k^0 = k pi / l0 (k may be real).
    double omega0(double k) const { return k * pi / l0; }
};

struct TrajectorySample {
    double t = 0.0;
    double l = 0.0;
    double l_dot = 0.0;
    double l_ddot = 0.0;
    double gamma = 0.0;     // l_dot / l
    double gamma_dot = 0.0; // l_ddot/l - gamma^2
};

// Evaluate l(t) and its first two derivatives in closed form.
inline TrajectorySample sample_trajectory(const CavityMotion& motion, double t) {
    const double w = motion.omega_cav();
    const double ph = w * t;
    const double s = std::sin(ph), c = std::cos(ph);

    double d, d1, d2; // delta and derivatives w.r.t. t
    switch (motion.kind) {
    case 1:
        d = s;
        d1 = w * c;
        d2 = -w * w * s;
        break;
    case 2:
        d = 1.0 - c;
        d1 = w * s;
        d2 = w * w * c;
        break;
    case 3:
        d = s * s * s;
        d1 = 3.0 * w * s * s * c;
        d2 = 3.0 * w * w * s * (2.0 * c * c - s * s);
        break;
    default:
        throw std::invalid_argument("sample_trajectory: invalid motion kind");
    }

    TrajectorySample out;
    out.t = t;
    out.l = motion.l0 * (1.0 + motion.epsilon * d);
    out.l_dot = motion.l0 * motion.epsilon * d1;
    out.l_ddot = motion.l0 * motion.epsilon * d2;
    out.gamma = out.l_dot / out.l;
    out.gamma_dot = out.l_ddot / out.l - out.gamma * out.gamma;
    return out;
}

// Instantaneous eigenfrequency Omega_k(t) = k pi / l(t) for integer mode k >= 1.
inline double instantaneous_frequency(const CavityMotion& motion, int k, double t) {
    if (k < 1)
        throw std::invalid_argument("instantaneous_frequency: mode index must be >= 1");
    return static_cast<double>(k) * pi / sample_trajectory(motion, t).l;
}

// Period average of l(t).  The sine powers of kinds 1 and 3 average to zero;
// kind 2 oscillates about l0 (1 + eps).
inline double mean_length(const CavityMotion& motion) {
    return motion.kind == 2 ? motion.l0 * (1.0 + motion.epsilon) : motion.l0;
}

// Detuning of the drive from twice the mode frequency at the mean length:
// w_cav = 2 (mean_Omega_n + Delta).
inline double detuning_parameter(const CavityMotion& motion) {
    const double mean_omega_n = motion.resonance_index * pi / mean_length(motion);
    return 0.5 * motion.omega_cav() - mean_omega_n;
}

// Maximum |l_dot| over one period, found by a dense scan.  Values >= 1 mean
// the mirror is superluminal; callers may warn but the motion stays legal.
inline double mirror_speed_bound(const CavityMotion& motion, int samples_per_period = 20000) {
    const double T = motion.period();
    double vmax = 0.0;
    for (int i = 0; i <= samples_per_period; ++i) {
        const double t = T * static_cast<double>(i) / samples_per_period;
        vmax = std::max(vmax, std::abs(sample_trajectory(motion, t).l_dot));
    }
    return vmax;
}

// Slow time tau = eps * Omega_1 * t / 2, the natural scale of resonant
// amplification.  Under the retuned drive the reference frequency is the one
// defined at the mean cavity length.
inline double slow_time(const CavityMotion& motion, double t) {
    const double lref = motion.drive == Drive::true_resonance ? mean_length(motion) : motion.l0;
    return 0.5 * motion.epsilon * (pi / lref) * t;
}

} // namespace dyncav
