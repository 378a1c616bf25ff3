#pragma once

// Finite-key secret fraction for the three-state time-bin protocol with one
// decoy intensity, composable security. The bounds follow the published
// one-decoy analysis of Rusca, Boaron, Gruenenfelder, Martin, Zbinden,
// Appl. Phys. Lett. 112, 171104 (2018); the phase-error correction term
// gamma() is from Lim, Curty, Walenta, Xu, Zbinden, Phys. Rev. A 89,
// 022307 (2014). docs/finite-key.md walks through every term and the
// failure-probability budget.
//
// Counting conventions: detections n and errors m are sifted totals per basis
// and per intensity; Hoeffding deviations are taken at epsilon' = eps_sec /
// kOneDecoyUnionEvents, one share per concentration event in the union bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "model.hpp"
#include "quantities.hpp"
#include "simulator.hpp"

namespace sdmqkd {

// Number of probabilistic events in the security proof's union bound; each
// receives an equal share of the secrecy failure budget.
inline constexpr double kOneDecoyUnionEvents = 19.0;

// Multiplier on log2(kOneDecoyUnionEvents / eps_sec) in the key-length bound,
// covering the smoothing and hashing penalties of the entropy accounting.
inline constexpr double kSecrecyOverheadFactor = 6.0;

// Union-bound constant inside gamma(); 21 events enter the phase-error
// transfer argument.
inline constexpr double kGammaUnionFactor = 21.0;

// Statistical penalty for transferring the observed check-basis phase error
// rate onto the unobserved key-basis single-photon events.
inline double gamma_correction(double a, double b, double c, double d) {
    if (b <= 0.0 || b >= 1.0) return 0.0;
    const double cd = c * d;
    const double sum = c + d;
    const double lead = sum * (1.0 - b) * b / (cd * std::log(2.0));
    const double arg = sum / (cd * (1.0 - b) * b) * (kGammaUnionFactor * kGammaUnionFactor) / (a * a);
    return std::sqrt(lead * std::log2(arg));
}

// Decoy-state bounds on the vacuum and single-photon contributions of one
// block, plus the phase-error estimate they support.
struct DecoyBounds {
    double tau0 = 0, tau1 = 0;        // emitted vacuum / single-photon fractions
    double s_z0_lower = 0;            // key-basis vacuum events
    double s_z1_lower = 0;            // key-basis single-photon events
    double s_x1_lower = 0;            // check-basis single-photon events
    double v_x1_upper = 0;            // check-basis single-photon errors
    double phi_z_upper = 0.5;         // key-basis single-photon phase error rate
};

namespace detail {

// Poisson mixture weight of emitting exactly n photons.
inline double tau_n(const ProtocolParams& p, int n) {
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    return p.p_mu1 * std::exp(-p.mu1) * std::pow(p.mu1, n) / fact +
           (1.0 - p.p_mu1) * std::exp(-p.mu2) * std::pow(p.mu2, n) / fact;
}

struct BasisBounds {
    double n_plus_mu1, n_minus_mu1, n_plus_mu2, n_minus_mu2;
    double m_plus_mu1, m_minus_mu1, m_plus_mu2, m_minus_mu2;
    double s0_lower, s0_upper, s1_lower;
};

// Finite-size envelopes around the per-intensity counts, then the one-decoy
// vacuum and single-photon bounds built from them.
inline BasisBounds basis_bounds(const ProtocolParams& p, double eps_prime, double tau0,
                                double tau1, std::uint64_t n_k1, std::uint64_t n_k2,
                                std::uint64_t m_k1, std::uint64_t m_k2) {
    const double n_total = static_cast<double>(n_k1 + n_k2);
    const double m_total = static_cast<double>(m_k1 + m_k2);
    const double dn = hoeffding_delta(n_total, eps_prime);
    const double dm = hoeffding_delta(m_total, eps_prime);

    BasisBounds b{};
    const double e1 = std::exp(p.mu1) / p.p_mu1;
    const double e2 = std::exp(p.mu2) / (1.0 - p.p_mu1);
    b.n_plus_mu1 = e1 * (static_cast<double>(n_k1) + dn);
    b.n_minus_mu1 = e1 * (static_cast<double>(n_k1) - dn);
    b.n_plus_mu2 = e2 * (static_cast<double>(n_k2) + dn);
    b.n_minus_mu2 = e2 * (static_cast<double>(n_k2) - dn);
    b.m_plus_mu1 = e1 * (static_cast<double>(m_k1) + dm);
    b.m_minus_mu1 = e1 * (static_cast<double>(m_k1) - dm);
    b.m_plus_mu2 = e2 * (static_cast<double>(m_k2) + dm);
    b.m_minus_mu2 = e2 * (static_cast<double>(m_k2) - dm);

    const double dmu = p.mu1 - p.mu2;
    b.s0_lower = std::clamp(tau0 / dmu * (p.mu1 * b.n_minus_mu2 - p.mu2 * b.n_plus_mu1),
                            0.0, n_total);
    // Every vacuum event is an error with probability 1/2, so twice the error
    // envelope bounds the vacuum contribution from above.
    b.s0_upper = std::clamp(2.0 * tau0 * std::min(b.m_plus_mu1, b.m_plus_mu2), 0.0, n_total);

    const double s1 = tau1 * p.mu1 / (p.mu2 * dmu) *
                      (b.n_minus_mu2 - (p.mu2 * p.mu2) / (p.mu1 * p.mu1) * b.n_plus_mu1 -
                       (p.mu1 * p.mu1 - p.mu2 * p.mu2) / (p.mu1 * p.mu1) * b.s0_upper / tau0);
    b.s1_lower = std::clamp(s1, 0.0, n_total - b.s0_lower);
    return b;
}

}  // namespace detail

inline DecoyBounds decoy_bounds(const BlockStats& stats, const ProtocolParams& p) {
    validate(p);
    validate(stats);

    DecoyBounds d;
    d.tau0 = detail::tau_n(p, 0);
    d.tau1 = detail::tau_n(p, 1);
    const double eps_prime = p.eps_sec / kOneDecoyUnionEvents;

    const auto z = detail::basis_bounds(p, eps_prime, d.tau0, d.tau1, stats.n_z_mu1,
                                        stats.n_z_mu2, stats.m_z_mu1, stats.m_z_mu2);
    const auto x = detail::basis_bounds(p, eps_prime, d.tau0, d.tau1, stats.n_x_mu1,
                                        stats.n_x_mu2, stats.m_x_mu1, stats.m_x_mu2);
    d.s_z0_lower = z.s0_lower;
    d.s_z1_lower = z.s1_lower;
    d.s_x1_lower = x.s1_lower;

    const double dmu = p.mu1 - p.mu2;
    const double m_minus_mu2 = std::max(0.0, x.m_minus_mu2);
    d.v_x1_upper = std::max(0.0, d.tau1 * (x.m_plus_mu1 - m_minus_mu2) / dmu);

    if (stats.n_x() == 0 || d.s_x1_lower <= 0.0 || d.s_z1_lower <= 0.0) {
        // Nothing to estimate from: assume the worst-case phase error.
        d.phi_z_upper = 0.5;
        return d;
    }
    const double ratio = d.v_x1_upper / d.s_x1_lower;
    const double phi = ratio + gamma_correction(p.eps_sec, ratio, d.s_x1_lower, d.s_z1_lower);
    d.phi_z_upper = std::min(0.5, std::max(0.0, phi));
    return d;
}

struct FiniteKeyResult {
    double s_z0_lower = 0;
    double s_z1_lower = 0;
    double phi_z_upper = 0.5;
    double lambda_ec = 0;     // error-correction leakage, bits
    double secret_bits = 0;   // extractable secret key length (already floored)
    double rate_bps = 0;      // secret_bits / t_acq
    double qber_z = 0;
};

inline FiniteKeyResult secret_key_length(const DecoyBounds& d, const BlockStats& stats,
                                         const ProtocolParams& p) {
    validate(p);
    validate(stats);

    FiniteKeyResult r;
    r.s_z0_lower = d.s_z0_lower;
    r.s_z1_lower = d.s_z1_lower;
    r.phi_z_upper = d.phi_z_upper;
    if (stats.n_z() == 0) return r;

    r.qber_z = stats.qber_z();
    r.lambda_ec = p.f_ec * static_cast<double>(stats.n_z()) * binary_entropy(r.qber_z);

    const double secrecy_cost = kSecrecyOverheadFactor * std::log2(kOneDecoyUnionEvents / p.eps_sec);
    const double correctness_cost = std::log2(2.0 / p.eps_corr);
    const double ell = d.s_z0_lower + d.s_z1_lower * (1.0 - binary_entropy(d.phi_z_upper)) -
                       r.lambda_ec - secrecy_cost - correctness_cost;
    r.secret_bits = std::floor(std::max(0.0, ell));
    r.rate_bps = r.secret_bits / stats.t_acq_s;
    return r;
}

inline FiniteKeyResult analyze_block(const BlockStats& stats, const ProtocolParams& p) {
    return secret_key_length(decoy_bounds(stats, p), stats, p);
}

// One requested operating point of a rate-versus-loss sweep. loss_db is the
// full channel budget (fibre + fan-in/out + attenuator) excluding the
// per-core spread, which rides on top unchanged.
struct SweepPoint {
    double loss_db = 0;
    double block_bits = 5.67e9;  // aggregated key-basis detections per block
};

struct SweepResult {
    double loss_db = 0;
    double block_bits = 0;
    double t_acq_s = 0;             // time to accumulate the block at this loss
    double aggregate_skr_bps = 0;   // summed over cores
    double per_core_mean_bps = 0;
};

// Closed-form rate-versus-loss curve. The channel's variable attenuator is
// retuned per point to hit the requested total loss; the calibration scale
// already present in the receiver is kept frozen, mirroring a bench sweep
// where only the attenuator moves. Acquisition time stretches with loss so
// each block reaches the same size.
inline std::vector<SweepResult> rate_vs_loss_curve(const ProtocolParams& p,
                                                   const ChannelSpec& chan,
                                                   const ReceiverSpec& rx,
                                                   const std::vector<SweepPoint>& points,
                                                   int n_threads = 1) {
    validate(p);
    validate(chan);
    validate(rx);
    const double fixed_db =
        chan.length_km * chan.atten_db_per_km + chan.fan_io_db + rx.wdm_insertion_db;

    std::vector<SweepResult> out;
    out.reserve(points.size());
    for (const auto& pt : points) {
        double extra = pt.loss_db - fixed_db;
        if (extra < 0.0) {
            if (extra < -0.05)
                throw ConfigError("rate_vs_loss_curve: requested loss " +
                                  std::to_string(pt.loss_db) +
                                  " dB is below the fixed fibre and fan-in/out budget of " +
                                  std::to_string(fixed_db) + " dB");
            extra = 0.0;  // rounding slack only
        }
        ChannelSpec c = chan;
        c.extra_attenuation_db = extra;

        double aggregate_nz = 0.0;
        for (int core = 0; core < c.n_cores; ++core) {
            const double bg = crosstalk_background_rate(p, c, core, rx);
            aggregate_nz += expected_rates(p, c, core, rx, bg).n_z_rate;
        }
        SweepResult res;
        res.loss_db = pt.loss_db;
        res.block_bits = pt.block_bits;
        res.t_acq_s = pt.block_bits / aggregate_nz;  // dark counts keep the rate nonzero

        const auto blocks =
            simulate_sdm(p, c, rx, SimulationMode::analytic(res.t_acq_s), {}, n_threads);
        for (const auto& b : blocks)
            res.aggregate_skr_bps += analyze_block(b.stats, p).rate_bps;
        res.per_core_mean_bps = res.aggregate_skr_bps / c.n_cores;
        out.push_back(res);
    }
    return out;
}

}  // namespace sdmqkd
