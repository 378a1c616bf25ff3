#pragma once

// Classical/quantum coexistence on the same multicore fibre: the noise budget
// a co-propagating classical channel injects into each quantum core, and the
// bit error rate the classical receivers see after the demux.
//
// The classical impairment model is direct detection limited by receiver
// noise, BER = 0.5 * erfc(Q / sqrt(2)) with Q proportional to the square root
// of received power; the proportionality is anchored so that the configured
// sensitivity power corresponds to BER 1e-9 exactly.

#include <cmath>
#include <vector>

#include "finitekey.hpp"
#include "model.hpp"
#include "quantities.hpp"
#include "simulator.hpp"

namespace sdmqkd {

namespace detail {

// Argument x with 0.5 * erfc(x) == 1e-9, i.e. the Q/sqrt(2) of a receiver at
// its sensitivity point. Newton refinement, then a final nudge upward by ulps
// so the anchor inequality holds literally in floating point.
inline double ber_anchor_argument() {
    static const double x9 = [] {
        const double target = 2e-9;  // erfc(x) = 2 * BER
        double x = 4.0;
        for (int i = 0; i < 60; ++i) {
            const double f = std::erfc(x) - target;
            const double df = -2.0 / std::sqrt(M_PI) * std::exp(-x * x);
            const double step = f / df;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        while (0.5 * std::erfc(x) > 1e-9)
            x = std::nextafter(x, std::numeric_limits<double>::infinity());
        return x;
    }();
    return x9;
}

}  // namespace detail

// Bit error rate of one classical core given its received power and the
// power at which the receiver reaches BER 1e-9. Zero or negative power gives
// the coin-flip rate 0.5.
inline double classical_ber(double rx_power_dbm, double rx_sensitivity_dbm) {
    const double ratio = std::pow(10.0, (rx_power_dbm - rx_sensitivity_dbm) / 10.0);
    if (!(ratio > 0.0)) return 0.5;
    return 0.5 * std::erfc(detail::ber_anchor_argument() * std::sqrt(ratio));
}

// Photon rate leaking through the demux into the quantum acceptance window,
// per core, with detector efficiency folded in (the background convention the
// simulator consumes). Referenced at the quantum wavelength so the leaked
// light is treated exactly like signal light by the downstream optics.
inline double leakage_background_hz(double rx_power_dbm, double extinction_db,
                                    double quantum_wavelength_nm, double eta_det) {
    return photon_flux_hz(rx_power_dbm - extinction_db, quantum_wavelength_nm) * eta_det;
}

// Per-core background entering each quantum receiver when every core also
// carries the classical channel: the neighbours' quantum signals through
// inter-core coupling, the co-propagating classical residue through the
// demux, and the neighbours' classical light coupling across cores before
// hitting the demux.
inline std::vector<double> coexistence_backgrounds(const ProtocolParams& p,
                                                   const ChannelSpec& chan,
                                                   const ReceiverSpec& rx,
                                                   const ClassicalChannelSpec& cl) {
    validate(p);
    validate(chan);
    validate(rx);
    validate(cl);
    const double direct_leak = leakage_background_hz(cl.rx_power_dbm, cl.wdm_extinction_db,
                                                     p.wavelength_nm, rx.eta_det);
    std::vector<double> bg(static_cast<std::size_t>(chan.n_cores));
    for (int core = 0; core < chan.n_cores; ++core) {
        double neighbour_coupling = 0.0;
        const auto& row = chan.crosstalk_db[static_cast<std::size_t>(core)];
        for (int j = 0; j < chan.n_cores; ++j) {
            if (j == core || std::isinf(row[static_cast<std::size_t>(j)])) continue;
            neighbour_coupling += db_to_linear(row[static_cast<std::size_t>(j)]);
        }
        bg[static_cast<std::size_t>(core)] =
            crosstalk_background_rate(p, chan, core, rx) +
            direct_leak * (1.0 + neighbour_coupling);
    }
    return bg;
}

struct CoexistenceCoreResult {
    TaggedBlockStats block;
    FiniteKeyResult key;
    double classical_ber = 0.5;
};

// Full-fibre coexistence run: simulate every quantum core under the combined
// background, analyze each block, and score the classical channel. With the
// classical power at -infinity dBm and no demux insertion loss this reduces
// exactly to the quantum-only system.
inline std::vector<CoexistenceCoreResult> coexistence_run(const ProtocolParams& p,
                                                          const ChannelSpec& chan,
                                                          const ReceiverSpec& rx,
                                                          const ClassicalChannelSpec& cl,
                                                          const SimulationMode& mode,
                                                          int n_threads = 1) {
    const auto bg = coexistence_backgrounds(p, chan, rx, cl);
    const auto blocks = simulate_sdm(p, chan, rx, mode, bg, n_threads);
    const double ber = classical_ber(cl.rx_power_dbm, cl.rx_sensitivity_dbm);

    std::vector<CoexistenceCoreResult> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) {
        CoexistenceCoreResult r;
        r.block = b;
        r.key = analyze_block(b.stats, p);
        r.classical_ber = ber;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace sdmqkd
