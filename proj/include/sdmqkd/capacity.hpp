#pragma once

// Encoding-strategy comparison for a shared multicore link: N parallel
// qubit channels versus one high-dimensional channel spanning the same N
// modes, against the repeaterless capacity bound of the equivalent
// lossy channel (Pirandola, Laurenza, Ottaviani, Banchi, Nat. Commun. 8,
// 15043 (2017)).
//
// Both strategies are scored per clock cycle in the asymptotic limit. The
// high-dimensional side is credited with ideal error correction (its coding
// overhead enters only through the 2*H_d(q) Shannon term), while the qubit
// side pays the practical f_ec * h(q) cost; the comparison is therefore
// conservative toward the high-dimensional encoding, which strengthens any
// conclusion in favour of parallel qubit channels.

#include <cmath>

#include "model.hpp"
#include "quantities.hpp"

namespace sdmqkd {

struct EncodingParams {
    double channel_loss_db = 3.75;  // one core, transmitter to receiver input
    double eta_bob = 0.85;
    double eta_det = 0.6;
    double mu = 0.11;               // mean photon number per pulse
    double f_ec = 1.16;             // qubit-channel error-correction inefficiency
};

// Secret bits per mode per use through a pure-loss channel of transmissivity
// eta: -log2(1 - eta). Unbounded as eta -> 1, so eta is required below 1.
inline double plob_single(double eta) {
    if (eta < 0.0 || eta >= 1.0)
        throw std::domain_error("plob_single: transmissivity must be in [0, 1)");
    return -std::log2(1.0 - eta);
}

// N identical cores give N independent pure-loss channels, so the bound is
// additive in the core count.
inline double plob_mcf(int n_cores, double eta) {
    if (n_cores < 1) throw std::domain_error("plob_mcf: n_cores must be >= 1");
    return static_cast<double>(n_cores) * plob_single(eta);
}

inline double total_efficiency(const EncodingParams& p) {
    return db_to_linear(p.channel_loss_db) * p.eta_bob * p.eta_det;
}

// Probability that a weak coherent pulse yields at least one detection.
inline double detection_gain(const EncodingParams& p) {
    return -std::expm1(-p.mu * total_efficiency(p));
}

// N parallel qubit channels, asymptotic secret fraction per clock cycle.
inline double parallel_rate(const EncodingParams& p, int n_modes, double qber) {
    if (n_modes < 1) throw std::domain_error("parallel_rate: n_modes must be >= 1");
    const double secret = 1.0 - binary_entropy(qber) - p.f_ec * binary_entropy(qber);
    // Group the per-channel product first so the N-channel figure is exactly
    // N times the single-channel one, not merely close to it.
    const double per_channel = detection_gain(p) * std::max(0.0, secret);
    return static_cast<double>(n_modes) * per_channel;
}

// One d-dimensional channel over the same modes: log2(d) raw bits per
// detection, reduced by the d-ary error term on both reconciliation and
// privacy amplification (Sheridan and Scarani, Phys. Rev. A 82, 030301
// (2010)).
inline double hid_rate(const EncodingParams& p, int dimension, double error_rate) {
    if (dimension < 2) throw std::domain_error("hid_rate: dimension must be >= 2");
    const double secret =
        std::log2(static_cast<double>(dimension)) - 2.0 * dary_entropy(error_rate, dimension);
    return detection_gain(p) * std::max(0.0, secret);
}

// Error rate where the high-dimensional encoding overtakes N parallel qubit
// channels of the same mode budget, found by scan plus bisection. Returns a
// negative value when no crossover exists in (0, q_max).
inline double crossover_error_rate(const EncodingParams& p, int n_modes, double q_max = 0.25) {
    if (n_modes < 2) throw std::domain_error("crossover_error_rate: n_modes must be >= 2");
    auto diff = [&](double q) { return parallel_rate(p, n_modes, q) - hid_rate(p, n_modes, q); };

    const int steps = 2048;
    double prev_q = 1e-12;
    double prev_d = diff(prev_q);
    for (int i = 1; i <= steps; ++i) {
        const double q = q_max * i / steps;
        const double d = diff(q);
        if ((prev_d > 0.0) != (d > 0.0)) {
            double lo = prev_q, hi = q;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                if ((diff(mid) > 0.0) == (prev_d > 0.0))
                    lo = mid;
                else
                    hi = mid;
            }
            return 0.5 * (lo + hi);
        }
        prev_q = q;
        prev_d = d;
    }
    return -1.0;
}

}  // namespace sdmqkd
