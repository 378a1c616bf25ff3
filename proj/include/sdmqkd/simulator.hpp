#pragma once

// Event-level Monte Carlo generation of per-core detection statistics with
// ground-truth photon-number tagging, plus the closed-form expected-value
// model used for full-block extrapolation and calibration.
//
// The two modes are built from the same per-slot probability model and agree
// to Monte Carlo precision:
//
//   * Weak coherent pulses: photon number ~ Poisson(mu_k), one pulse per clock
//     slot. Each photon is routed independently (fibre survival, basis tap,
//     1x4 split, detector efficiency), so per-detector photon counts are
//     independent Poissons and the per-detector click probability is exactly
//     1 - exp(-mu_k * eta_branch).
//   * Noise (dark counts plus any injected background) fires per detector per
//     slot over the whole slot period; only the fraction inside the temporal
//     gate is kept in the statistics, but every click occupies the detector.
//   * Dead time is a non-extending per-detector hold-off of
//     round(dead_time * clock) slots. For slot-i.i.d. candidate clicks this is
//     a renewal process, so the recorded fraction is exactly
//     alpha = 1 / (1 + p_candidate * D).
//   * A slot with recorded clicks in an arm yields one arm event (double
//     clicks in the same time bin are indistinguishable at the time-tagger).
//     Events with at least one signal-caused click count as signal; noise-only
//     in-gate events count as noise and carry a random bit.
//   * Sifting keeps an arm event when Alice's (independent) basis choice
//     matches the arm.
//
// Error model: key-basis signal events flip with the intrinsic z_error_prob,
// check-basis signal events with (1 - V)/2, noise events with 1/2.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "model.hpp"
#include "quantities.hpp"
#include "rng.hpp"

namespace sdmqkd {

struct SimulationMode {
    enum class Kind { analytic, monte_carlo };
    Kind kind = Kind::analytic;
    double t_acq_s = 30.0;          // analytic mode: acquisition span
    std::uint64_t seed = 1;         // monte carlo: master seed (per-core streams derive from it)
    std::uint64_t pulses = 10'000'000;

    static SimulationMode analytic(double t_acq_s) {
        SimulationMode m;
        m.kind = Kind::analytic;
        m.t_acq_s = t_acq_s;
        return m;
    }
    static SimulationMode monte_carlo(std::uint64_t seed, std::uint64_t pulses) {
        SimulationMode m;
        m.kind = Kind::monte_carlo;
        m.seed = seed;
        m.pulses = pulses;
        return m;
    }
};

// Emitted photon numbers at or above this value share the last truth bucket.
inline constexpr int kMaxPhotonTag = 8;

enum class Origin : int { signal = 0, dark = 1, leakage = 2 };

// Sifted detections and errors partitioned by emitted photon number and by
// the physical cause of the click. Ground truth for validating decoy bounds.
struct TruthTable {
    std::array<std::array<std::uint64_t, 3>, kMaxPhotonTag + 1> det{};
    std::array<std::array<std::uint64_t, 3>, kMaxPhotonTag + 1> err{};

    std::uint64_t detections(int photon_number) const {
        const auto& row = det[static_cast<std::size_t>(photon_number)];
        return row[0] + row[1] + row[2];
    }
    std::uint64_t errors(int photon_number) const {
        const auto& row = err[static_cast<std::size_t>(photon_number)];
        return row[0] + row[1] + row[2];
    }
    std::uint64_t total_detections() const {
        std::uint64_t s = 0;
        for (int n = 0; n <= kMaxPhotonTag; ++n) s += detections(n);
        return s;
    }
    std::uint64_t total_errors() const {
        std::uint64_t s = 0;
        for (int n = 0; n <= kMaxPhotonTag; ++n) s += errors(n);
        return s;
    }

    bool operator==(const TruthTable&) const = default;
};

// Exact bookkeeping of where every photon and every click went. Each line is
// an identity the Monte Carlo maintains exactly (see tests).
struct ConservationTally {
    std::uint64_t photons_emitted = 0;
    std::uint64_t photons_lost = 0;    // absorbed in the channel or missed by a detector
    std::uint64_t photons_z = 0;       // landed on a key-basis detector
    std::uint64_t photons_x = 0;       // landed on the check-basis detector

    std::uint64_t cand_z = 0, cand_x = 0;  // slot-detector click candidates
    std::uint64_t rec_z = 0, rec_x = 0;    // candidates recorded (detector live)
    std::uint64_t dead_z = 0, dead_x = 0;  // candidates lost to hold-off

    std::uint64_t noise_in_gate_z = 0, noise_out_gate_z = 0;
    std::uint64_t noise_in_gate_x = 0, noise_out_gate_x = 0;

    std::uint64_t events_z = 0, events_x = 0;        // arm events before sifting
    std::uint64_t sift_drop_z = 0, sift_drop_x = 0;  // basis-mismatch discards

    bool operator==(const ConservationTally&) const = default;
};

struct TaggedBlockStats {
    BlockStats stats;
    TruthTable truth_z, truth_x;
    ConservationTally tally;
    bool has_truth = false;           // Monte Carlo runs only
    bool saturation_warning = false;  // candidate rate high enough that hold-off dominates
    int core_id = 0;

    bool operator==(const TaggedBlockStats&) const = default;
};

// Expected per-second rates of every sifted counter, plus the intermediate
// per-slot probabilities (exposed for tests and for the Monte Carlo kernel,
// which consumes the same numbers).
struct CoreExpectation {
    double n_z_mu1 = 0, m_z_mu1 = 0, n_z_mu2 = 0, m_z_mu2 = 0;  // rates, 1/s
    double n_x_mu1 = 0, m_x_mu1 = 0, n_x_mu2 = 0, m_x_mu2 = 0;
    double n_z_rate = 0, n_x_rate = 0;

    double p_sig_z_det[2] = {0, 0};  // per key-basis detector, per slot, by intensity
    double p_sig_x[2] = {0, 0};      // check-basis detector
    double p_noise_full_z = 0;       // per detector per slot, whole-slot noise
    double p_noise_full_x = 0;
    double gate_fraction = 0;        // share of the slot covered by the temporal filter
    double alpha_z = 0, alpha_x = 0; // live fraction under dead time
    double leak_share_z = 0, leak_share_x = 0;  // background share of the noise rate
    std::uint64_t dead_slots = 0;
    bool saturation_warning = false;
};

namespace detail {

struct PerIntensity {
    double p_k;   // Alice's probability of this intensity
    double mu;
};

inline std::array<PerIntensity, 2> intensities(const ProtocolParams& p) {
    return {PerIntensity{p.p_mu1, p.mu1}, PerIntensity{1.0 - p.p_mu1, p.mu2}};
}

}  // namespace detail

// Closed-form expected rates for one core. background_rate_hz is a photon
// rate referenced to the receiver input with detector efficiency already
// applied; it is attenuated by the internal receiver optics and split across
// the two arms here, while dark counts stay local to each detector.
inline CoreExpectation expected_rates(const ProtocolParams& p, const ChannelSpec& chan,
                                      int core, const ReceiverSpec& rx,
                                      double background_rate_hz) {
    const double loss_db = effective_core_loss(chan, core, rx);
    const double front = db_to_linear(loss_db) * rx.eta_bob * rx.calibration_scale;
    const double nd = static_cast<double>(rx.n_z_detectors);

    CoreExpectation ex;
    ex.gate_fraction = rx.gate_width_s * p.clock_hz;
    if (ex.gate_fraction > 1.0)
        throw ConfigError("expected_rates: gate_width_s covers more than one clock slot");
    ex.dead_slots = static_cast<std::uint64_t>(std::llround(rx.dead_time_s * p.clock_hz));

    const double eta_z_det = front * rx.basis_split_z * rx.eta_det / nd;
    const double eta_x = front * (1.0 - rx.basis_split_z) * rx.eta_det;

    // Background splits at the basis tap like any other light; eta_det is
    // already folded into the injected rate by convention.
    const double bg_recv = background_rate_hz * rx.eta_bob * rx.calibration_scale;
    const double noise_z_hz = rx.dark_rate_hz + bg_recv * rx.basis_split_z / nd;
    const double noise_x_hz = rx.dark_rate_hz + bg_recv * (1.0 - rx.basis_split_z);
    ex.p_noise_full_z = noise_z_hz / p.clock_hz;
    ex.p_noise_full_x = noise_x_hz / p.clock_hz;
    ex.leak_share_z = noise_z_hz > 0.0 ? (bg_recv * rx.basis_split_z / nd) / noise_z_hz : 0.0;
    ex.leak_share_x = noise_x_hz > 0.0 ? (bg_recv * (1.0 - rx.basis_split_z)) / noise_x_hz : 0.0;

    const auto ks = detail::intensities(p);
    double p_cand_z_mean = 0.0, p_cand_x_mean = 0.0;
    for (int k = 0; k < 2; ++k) {
        ex.p_sig_z_det[k] = -std::expm1(-ks[k].mu * eta_z_det);
        ex.p_sig_x[k] = -std::expm1(-ks[k].mu * eta_x);
        p_cand_z_mean += ks[k].p_k * (1.0 - (1.0 - ex.p_sig_z_det[k]) * (1.0 - ex.p_noise_full_z));
        p_cand_x_mean += ks[k].p_k * (1.0 - (1.0 - ex.p_sig_x[k]) * (1.0 - ex.p_noise_full_x));
    }
    const double d_slots = static_cast<double>(ex.dead_slots);
    ex.alpha_z = 1.0 / (1.0 + p_cand_z_mean * d_slots);
    ex.alpha_x = 1.0 / (1.0 + p_cand_x_mean * d_slots);
    ex.saturation_warning = (p_cand_z_mean * d_slots > 1.0) || (p_cand_x_mean * d_slots > 1.0);

    const double x_err = 0.5 * (1.0 - rx.visibility);
    const double g = ex.gate_fraction;

    double* n_z[2] = {&ex.n_z_mu1, &ex.n_z_mu2};
    double* m_z[2] = {&ex.m_z_mu1, &ex.m_z_mu2};
    double* n_x[2] = {&ex.n_x_mu1, &ex.n_x_mu2};
    double* m_x[2] = {&ex.m_x_mu1, &ex.m_x_mu2};
    for (int k = 0; k < 2; ++k) {
        const double ps = ex.alpha_z * ex.p_sig_z_det[k];
        const double pn = ex.alpha_z * (1.0 - ex.p_sig_z_det[k]) * ex.p_noise_full_z * g;
        const double none_sig = std::pow(1.0 - ps, nd);
        const double none_any = std::pow(1.0 - ps - pn, nd);
        const double ev_sig = 1.0 - none_sig;   // >= 1 recorded signal click in the arm
        const double ev_noise = none_sig - none_any;  // in-gate noise only

        const double slot_to_hz = p.clock_hz * ks[k].p_k;
        *n_z[k] = slot_to_hz * p.p_z_alice * (ev_sig + ev_noise);
        *m_z[k] = slot_to_hz * p.p_z_alice * (ev_sig * rx.z_error_prob + ev_noise * 0.5);

        const double ps_x = ex.alpha_x * ex.p_sig_x[k];
        const double pn_x = ex.alpha_x * (1.0 - ex.p_sig_x[k]) * ex.p_noise_full_x * g;
        *n_x[k] = slot_to_hz * (1.0 - p.p_z_alice) * (ps_x + pn_x);
        *m_x[k] = slot_to_hz * (1.0 - p.p_z_alice) * (ps_x * x_err + pn_x * 0.5);
    }
    ex.n_z_rate = ex.n_z_mu1 + ex.n_z_mu2;
    ex.n_x_rate = ex.n_x_mu1 + ex.n_x_mu2;
    return ex;
}

// Background photon rate injected into one core by its neighbours' quantum
// signals through inter-core coupling, referenced to the receiver input with
// detector efficiency applied (the convention expected_rates consumes).
// Isolation is output-referenced: the coupled light leaves through the same
// fan-out, attenuator, and demux as the signal, so it carries the destination
// core's full loss budget and stays a fixed ratio below the signal.
inline double crosstalk_background_rate(const ProtocolParams& p, const ChannelSpec& chan,
                                        int core, const ReceiverSpec& rx) {
    const double launch_flux =
        (p.p_mu1 * p.mu1 + (1.0 - p.p_mu1) * p.mu2) * p.clock_hz;  // photons/s per core
    double coupling = 0.0;
    const auto& row = chan.crosstalk_db[static_cast<std::size_t>(core)];
    for (int j = 0; j < chan.n_cores; ++j) {
        if (j == core) continue;
        const double iso = row[static_cast<std::size_t>(j)];
        if (std::isinf(iso)) continue;
        coupling += db_to_linear(iso);
    }
    return launch_flux * coupling * db_to_linear(effective_core_loss(chan, core, rx)) * rx.eta_det;
}

namespace detail {

// Precomputed per-core tables driving the Monte Carlo kernel.
struct McContext {
    // Joint (intensity, photon number) cumulative table, vacuum entries first
    // so that ~91% of pulses resolve with a single comparison.
    std::vector<double> joint_cum;
    std::vector<std::uint8_t> joint_k;
    std::vector<std::uint8_t> joint_n;
    double vacuum_cum = 0.0;  // cumulative mass of the two (k, n=0) entries

    // Per-photon routing, cumulative: n_z detector cells, then the check
    // detector, then the two miss cells; anything above is channel loss.
    std::array<double, 6> route_cum{};
    int nd = 4;

    double p_noise_z = 0, p_noise_x = 0;   // full-slot per-detector noise probability
    double log1m_noise_z = 0, log1m_noise_x = 0;
    double gate = 0;
    double p_za = 0;
    double z_err = 0, x_err = 0;
    double leak_share_z = 0, leak_share_x = 0;
    std::uint64_t dead = 0;
};

inline constexpr std::uint64_t kNeverSlot = std::numeric_limits<std::uint64_t>::max();

inline McContext make_mc_context(const ProtocolParams& p, const ChannelSpec& chan, int core,
                                 const ReceiverSpec& rx, double background_rate_hz,
                                 const CoreExpectation& ex) {
    McContext c;
    c.nd = rx.n_z_detectors;
    c.gate = ex.gate_fraction;
    c.p_za = p.p_z_alice;
    c.z_err = rx.z_error_prob;
    c.x_err = 0.5 * (1.0 - rx.visibility);
    c.leak_share_z = ex.leak_share_z;
    c.leak_share_x = ex.leak_share_x;
    c.dead = ex.dead_slots;
    c.p_noise_z = ex.p_noise_full_z;
    c.p_noise_x = ex.p_noise_full_x;
    c.log1m_noise_z = c.p_noise_z > 0.0 ? std::log1p(-c.p_noise_z) : 0.0;
    c.log1m_noise_x = c.p_noise_x > 0.0 ? std::log1p(-c.p_noise_x) : 0.0;

    const double loss_db = effective_core_loss(chan, core, rx);
    const double front = db_to_linear(loss_db) * rx.eta_bob * rx.calibration_scale;
    const double nd = static_cast<double>(rx.n_z_detectors);
    const double pz_det = front * rx.basis_split_z * rx.eta_det / nd;
    const double px_det = front * (1.0 - rx.basis_split_z) * rx.eta_det;
    const double pz_miss = front * rx.basis_split_z * (1.0 - rx.eta_det);
    const double px_miss = front * (1.0 - rx.basis_split_z) * (1.0 - rx.eta_det);
    double acc = 0.0;
    for (int d = 0; d < 4; ++d) {
        // Unused detector cells collapse to zero width when nd < 4.
        acc += d < rx.n_z_detectors ? pz_det : 0.0;
        c.route_cum[static_cast<std::size_t>(d)] = acc;
    }
    acc += px_det;
    c.route_cum[4] = acc;
    acc += pz_miss + px_miss;
    c.route_cum[5] = acc;  // remaining mass above this is channel loss

    // Joint intensity/photon-number table. The Poisson tail beyond the table
    // is folded into the last entry; its mass is < 1e-18 and unreachable by a
    // 53-bit uniform in practice.
    const auto ks = intensities(p);
    c.joint_cum.reserve(32);
    c.joint_k.reserve(32);
    c.joint_n.reserve(32);
    double cum = 0.0;
    for (int k = 0; k < 2; ++k) {
        cum += ks[static_cast<std::size_t>(k)].p_k * std::exp(-ks[static_cast<std::size_t>(k)].mu);
        c.joint_cum.push_back(cum);
        c.joint_k.push_back(static_cast<std::uint8_t>(k));
        c.joint_n.push_back(0);
    }
    c.vacuum_cum = cum;
    for (int n = 1; n <= 16; ++n) {
        for (int k = 0; k < 2; ++k) {
            const auto& in = ks[static_cast<std::size_t>(k)];
            double pmf = in.p_k * std::exp(-in.mu);
            for (int i = 1; i <= n; ++i) pmf *= in.mu / i;
            if (pmf < 1e-19 && n > 4) continue;
            cum += pmf;
            c.joint_cum.push_back(cum);
            c.joint_k.push_back(static_cast<std::uint8_t>(k));
            c.joint_n.push_back(static_cast<std::uint8_t>(n));
        }
    }
    c.joint_cum.back() = 2.0;  // sentinel: any uniform lands inside the table
    return c;
}

// Slots until the next whole-slot noise candidate, exclusive of the current
// one: geometric with per-slot probability p, matching an independent
// Bernoulli draw in every slot.
inline std::uint64_t noise_gap(std::mt19937_64& gen, double log1m_p) {
    if (log1m_p == 0.0) return kNeverSlot;
    const double u = uniform01_open_low(gen);
    const double g = std::floor(std::log(u) / log1m_p);
    if (!(g < 9e18)) return kNeverSlot;
    return static_cast<std::uint64_t>(g) + 1;
}

}  // namespace detail

// One core, one block. Monte Carlo mode draws every pulse; analytic mode
// rounds the closed-form expectations into counts.
inline TaggedBlockStats simulate_core(int core, const ProtocolParams& p, const ChannelSpec& chan,
                                      const ReceiverSpec& rx, const SimulationMode& mode,
                                      double background_rate_hz = 0.0) {
    validate(p);
    validate(chan);
    validate(rx);
    if (background_rate_hz < 0.0)
        throw ConfigError("simulate_core: background_rate_hz must be >= 0");

    const CoreExpectation ex = expected_rates(p, chan, core, rx, background_rate_hz);
    TaggedBlockStats out;
    out.core_id = core;
    out.saturation_warning = ex.saturation_warning;

    if (mode.kind == SimulationMode::Kind::analytic) {
        if (!(mode.t_acq_s > 0.0)) throw ConfigError("simulate_core: analytic t_acq_s must be positive");
        const double t = mode.t_acq_s;
        auto cnt = [t](double rate) { return static_cast<std::uint64_t>(std::llround(rate * t)); };
        out.stats.n_z_mu1 = cnt(ex.n_z_mu1);
        out.stats.m_z_mu1 = cnt(ex.m_z_mu1);
        out.stats.n_z_mu2 = cnt(ex.n_z_mu2);
        out.stats.m_z_mu2 = cnt(ex.m_z_mu2);
        out.stats.n_x_mu1 = cnt(ex.n_x_mu1);
        out.stats.m_x_mu1 = cnt(ex.m_x_mu1);
        out.stats.n_x_mu2 = cnt(ex.n_x_mu2);
        out.stats.m_x_mu2 = cnt(ex.m_x_mu2);
        out.stats.pulses_sent = static_cast<std::uint64_t>(std::llround(t * p.clock_hz));
        out.stats.t_acq_s = t;
        return out;
    }

    if (mode.pulses < 1) throw ConfigError("simulate_core: monte carlo needs pulses >= 1");
    const detail::McContext c = detail::make_mc_context(p, chan, core, rx, background_rate_hz, ex);
    std::mt19937_64 gen(core_stream_seed(mode.seed, core));

    // Per-detector state: key-basis detectors first, check detector last.
    std::array<std::uint64_t, 5> next_free{};
    std::array<std::uint64_t, 5> next_noise{};
    const int x_idx = c.nd;
    for (int d = 0; d <= c.nd; ++d) {
        const double lg = d < c.nd ? c.log1m_noise_z : c.log1m_noise_x;
        if (lg == 0.0) {
            next_noise[static_cast<std::size_t>(d)] = detail::kNeverSlot;
        } else {
            const std::uint64_t gap = detail::noise_gap(gen, lg);
            next_noise[static_cast<std::size_t>(d)] =
                gap == detail::kNeverSlot ? detail::kNeverSlot : gap - 1;
        }
    }
    std::uint64_t noise_horizon = next_noise[0];
    for (int d = 1; d <= c.nd; ++d) noise_horizon = std::min(noise_horizon, next_noise[static_cast<std::size_t>(d)]);

    auto& st = out.stats;
    auto& ty = out.tally;

    for (std::uint64_t slot = 0; slot < mode.pulses; ++slot) {
        const double u = uniform01(gen);
        int k, n;
        if (u < c.vacuum_cum) {
            k = u < c.joint_cum[0] ? 0 : 1;
            n = 0;
            if (slot < noise_horizon) continue;  // nothing can happen this slot
        } else {
            std::size_t i = 2;
            while (u >= c.joint_cum[i]) ++i;
            k = c.joint_k[i];
            n = c.joint_n[i];
        }

        unsigned z_hits = 0;  // bitmask over key-basis detectors
        bool x_hit = false;
        if (n > 0) {
            ty.photons_emitted += static_cast<std::uint64_t>(n);
            for (int ph = 0; ph < n; ++ph) {
                const double v = uniform01(gen);
                if (v >= c.route_cum[5]) {
                    ++ty.photons_lost;
                } else if (v >= c.route_cum[4]) {
                    ++ty.photons_lost;  // reached an arm but missed by the detector
                } else if (v >= c.route_cum[3]) {
                    x_hit = true;
                    ++ty.photons_x;
                } else {
                    int d = 0;
                    while (v >= c.route_cum[static_cast<std::size_t>(d)]) ++d;
                    z_hits |= 1u << d;
                    ++ty.photons_z;
                }
            }
            if (z_hits == 0 && !x_hit && slot < noise_horizon) continue;
        }

        // Detector processing in fixed index order keeps the draw sequence,
        // and therefore the whole run, reproducible.
        bool z_sig_click = false, z_noise_click = false;
        bool x_sig_click = false, x_noise_click = false;
        bool horizon_dirty = false;
        for (int d = 0; d <= x_idx; ++d) {
            const auto di = static_cast<std::size_t>(d);
            const bool is_x = d == x_idx;
            const bool sig = is_x ? x_hit : ((z_hits >> d) & 1u) != 0;
            const bool noise_due = next_noise[di] == slot;
            if (!sig && !noise_due) continue;
            if (noise_due) {
                const std::uint64_t gap = detail::noise_gap(gen, is_x ? c.log1m_noise_x : c.log1m_noise_z);
                next_noise[di] = gap == detail::kNeverSlot ? detail::kNeverSlot : slot + gap;
                horizon_dirty = true;
            }
            (is_x ? ty.cand_x : ty.cand_z) += 1;
            if (slot < next_free[di]) {
                (is_x ? ty.dead_x : ty.dead_z) += 1;
                continue;
            }
            next_free[di] = slot + c.dead + 1;
            (is_x ? ty.rec_x : ty.rec_z) += 1;
            if (sig) {
                (is_x ? x_sig_click : z_sig_click) = true;
            } else if (uniform01(gen) < c.gate) {
                (is_x ? ty.noise_in_gate_x : ty.noise_in_gate_z) += 1;
                (is_x ? x_noise_click : z_noise_click) = true;
            } else {
                (is_x ? ty.noise_out_gate_x : ty.noise_out_gate_z) += 1;
            }
        }
        if (horizon_dirty) {
            noise_horizon = next_noise[0];
            for (int d = 1; d <= x_idx; ++d)
                noise_horizon = std::min(noise_horizon, next_noise[static_cast<std::size_t>(d)]);
        }

        const bool z_event = z_sig_click || z_noise_click;
        const bool x_event = x_sig_click || x_noise_click;
        if (!z_event && !x_event) continue;
        ty.events_z += z_event ? 1 : 0;
        ty.events_x += x_event ? 1 : 0;

        const bool alice_z = uniform01(gen) < c.p_za;
        const int bucket = n < kMaxPhotonTag ? n : kMaxPhotonTag;

        if (z_event) {
            if (!alice_z) {
                ++ty.sift_drop_z;
            } else {
                Origin origin = Origin::signal;
                bool err;
                if (z_sig_click) {
                    err = uniform01(gen) < c.z_err;
                } else {
                    origin = uniform01(gen) < c.leak_share_z ? Origin::leakage : Origin::dark;
                    err = uniform01(gen) < 0.5;
                }
                (k == 0 ? st.n_z_mu1 : st.n_z_mu2) += 1;
                if (err) (k == 0 ? st.m_z_mu1 : st.m_z_mu2) += 1;
                const auto oi = static_cast<std::size_t>(origin);
                const auto bi = static_cast<std::size_t>(bucket);
                out.truth_z.det[bi][oi] += 1;
                if (err) out.truth_z.err[bi][oi] += 1;
            }
        }
        if (x_event) {
            if (alice_z) {
                ++ty.sift_drop_x;
            } else {
                Origin origin = Origin::signal;
                bool err;
                if (x_sig_click) {
                    err = uniform01(gen) < c.x_err;
                } else {
                    origin = uniform01(gen) < c.leak_share_x ? Origin::leakage : Origin::dark;
                    err = uniform01(gen) < 0.5;
                }
                (k == 0 ? st.n_x_mu1 : st.n_x_mu2) += 1;
                if (err) (k == 0 ? st.m_x_mu1 : st.m_x_mu2) += 1;
                const auto oi = static_cast<std::size_t>(origin);
                const auto bi = static_cast<std::size_t>(bucket);
                out.truth_x.det[bi][oi] += 1;
                if (err) out.truth_x.err[bi][oi] += 1;
            }
        }
    }

    st.pulses_sent = mode.pulses;
    st.t_acq_s = static_cast<double>(mode.pulses) / p.clock_hz;
    out.has_truth = true;
    return out;
}

// All cores. Monte Carlo seeds derive deterministically from (master seed,
// core index), so results do not depend on evaluation order or thread count.
// backgrounds may be empty (quantum-only: inter-core coupling of the quantum
// signals themselves) or hold one injected rate per core.
inline std::vector<TaggedBlockStats> simulate_sdm(const ProtocolParams& p, const ChannelSpec& chan,
                                                  const ReceiverSpec& rx, const SimulationMode& mode,
                                                  const std::vector<double>& backgrounds = {},
                                                  int n_threads = 1) {
    validate(p);
    validate(chan);
    validate(rx);
    if (!backgrounds.empty() && backgrounds.size() != static_cast<std::size_t>(chan.n_cores))
        throw ConfigError("simulate_sdm: backgrounds must be empty or have one entry per core");

    std::vector<double> bg(static_cast<std::size_t>(chan.n_cores));
    for (int core = 0; core < chan.n_cores; ++core)
        bg[static_cast<std::size_t>(core)] =
            backgrounds.empty() ? crosstalk_background_rate(p, chan, core, rx)
                                : backgrounds[static_cast<std::size_t>(core)];

    std::vector<TaggedBlockStats> out(static_cast<std::size_t>(chan.n_cores));
    if (n_threads <= 1 || chan.n_cores == 1) {
        for (int core = 0; core < chan.n_cores; ++core)
            out[static_cast<std::size_t>(core)] =
                simulate_core(core, p, chan, rx, mode, bg[static_cast<std::size_t>(core)]);
        return out;
    }

    const int workers = std::min(n_threads, chan.n_cores);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int core = w; core < chan.n_cores; core += workers)
                out[static_cast<std::size_t>(core)] =
                    simulate_core(core, p, chan, rx, mode, bg[static_cast<std::size_t>(core)]);
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

struct CalibrationResult {
    ReceiverSpec receiver;  // input spec with calibration_scale set
    double scale = 1.0;
};

// Scale the receiver chain so the mean key-basis detection rate over all
// cores matches the target. Absorbs unmodelled losses (splice, filter,
// coupling) into one documented scalar.
inline CalibrationResult calibrate_to_target(double target_detections_per_s,
                                             const ProtocolParams& p, const ChannelSpec& chan,
                                             const ReceiverSpec& rx) {
    if (!(target_detections_per_s > 0.0))
        throw ConfigError("calibrate_to_target: target must be positive");
    validate(p);
    validate(chan);
    validate(rx);

    auto mean_rate = [&](double scale) {
        ReceiverSpec r = rx;
        r.calibration_scale = scale;
        double sum = 0.0;
        for (int core = 0; core < chan.n_cores; ++core) {
            const double bg = crosstalk_background_rate(p, chan, core, r);
            sum += expected_rates(p, chan, core, r, bg).n_z_rate;
        }
        return sum / chan.n_cores;
    };

    const double ceiling = mean_rate(1.0);
    if (ceiling < target_detections_per_s)
        throw InfeasibleError(
            "calibrate_to_target: target " + std::to_string(target_detections_per_s) +
            " /s exceeds the attainable ceiling " + std::to_string(ceiling) + " /s at unit scale");

    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mean_rate(mid) < target_detections_per_s)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15) break;
    }
    CalibrationResult res;
    res.scale = 0.5 * (lo + hi);
    res.receiver = rx;
    res.receiver.calibration_scale = res.scale;
    return res;
}

}  // namespace sdmqkd
