#pragma once

// Domain configuration types: the protocol source parameters, the multicore
// channel, the receiver chain, the classical channel sharing the core, and the
// per-block counting record. These structs are the single source of truth for
// every symbol used by the simulator and the finite-key engine.
//
// Validation collects every violated invariant instead of stopping at the
// first one, so a bad config file is fixable in one round trip.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "quantities.hpp"
#include "rng.hpp"

namespace sdmqkd {

// Invalid or inconsistent configuration input.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A request the physical model cannot meet (e.g. a calibration target above
// the source/detector ceiling).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProtocolParams {
    double clock_hz = 595e6;        // pulse repetition rate
    double wavelength_nm = 1550.0;  // quantum channel wavelength
    double mu1 = 0.11;              // signal mean photon number per pulse
    double mu2 = 0.07;              // decoy mean photon number per pulse
    double p_mu1 = 0.7;             // probability of sending the signal intensity
    double p_z_alice = 0.9;         // probability Alice encodes in the key basis
    double eps_sec = 1e-9;          // secrecy failure budget
    double eps_corr = 1e-15;        // correctness failure budget
    double f_ec = 1.16;             // error-correction inefficiency
};

// Seed for the reproducible default per-core excess-loss spread, standing in
// for a measured per-core loss table.
inline constexpr std::uint64_t kDefaultExcessSeed = 0x37C0DEULL;

// Minimum acceptable inter-core isolation; the fibre class modelled here is
// specifically a low-crosstalk heterogeneous design.
inline constexpr double kMinCrosstalkIsolationDb = 40.0;

struct ChannelSpec {
    int n_cores = 37;
    double length_km = 7.9;
    double atten_db_per_km = 0.27;
    double fan_io_db = 1.6;            // total fan-in + fan-out insertion loss
    double extra_attenuation_db = 0.0; // variable attenuator emulating distance

    // Per-core spread on top of the common budget. Defaults to a reproducible
    // uniform draw in [0, 0.5] dB (see default_excess).
    std::vector<double> per_core_excess_db = default_excess(37, 0.5, kDefaultExcessSeed);

    // Inter-core isolation, dB, referenced at the fibre output: light coupled
    // from core j into core i arrives crosstalk_db[i][j] below what core j
    // launches through core i's own loss budget, i.e. the coupled light rides
    // a fixed ratio below the signal. The diagonal carries an infinity
    // sentinel ("no self-coupling").
    std::vector<std::vector<double>> crosstalk_db = uniform_crosstalk(37, 60.0);

    static std::vector<double> default_excess(int n, double spread_db, std::uint64_t seed) {
        std::mt19937_64 gen(seed);
        std::vector<double> out(static_cast<std::size_t>(n));
        for (auto& v : out) v = uniform01(gen) * spread_db;
        return out;
    }

    static std::vector<std::vector<double>> uniform_crosstalk(int n, double isolation_db) {
        std::vector<std::vector<double>> m(static_cast<std::size_t>(n),
                                           std::vector<double>(static_cast<std::size_t>(n), isolation_db));
        for (int i = 0; i < n; ++i)
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] =
                std::numeric_limits<double>::infinity();
        return m;
    }
};

struct ReceiverSpec {
    double eta_bob = 0.85;        // internal receiver transmissivity
    double eta_det = 0.6;         // detector efficiency
    double basis_split_z = 0.9;   // fraction routed to the key-basis arm (10 dB tap)
    int n_z_detectors = 4;        // 1x4 split in the key-basis arm
    double dark_rate_hz = 100.0;  // per detector
    double dead_time_s = 50e-9;   // per detector, non-extending hold-off
    double gate_width_s = 300e-12;// temporal acceptance window per pulse slot
    double visibility = 0.98;     // interferometer contrast; Fourier-basis error (1-V)/2
    double z_error_prob = 0.0;    // intrinsic key-basis flip probability per signal detection
    double wdm_insertion_db = 0.0;// demux filter loss, 0 when no classical channel is present

    // Single documented scalar folded into the eta_bob leg by the calibration
    // step; 1.0 means uncalibrated.
    double calibration_scale = 1.0;
};

struct ClassicalChannelSpec {
    double bitrate_bps = 1e10;
    double wavelength_nm = 1558.0;
    double rx_power_dbm = -34.0;       // received per core; the primary knob
    double wdm_extinction_db = 80.0;   // classical-to-quantum isolation at the demux
    double rx_sensitivity_dbm = -34.0; // received power giving BER 1e-9
};

struct AcquisitionSpec {
    double t_acq_s = 30.0;        // block acquisition time at the reference loss
    double block_bits = 5.67e9;   // key-basis detections per block, aggregated over all cores
};

struct CalibrationSpec {
    // Key-basis detection rate per core the receiver chain is scaled to
    // reproduce; 0 disables calibration.
    double target_z_detections_per_s = 0.0;
};

// Sifted counting record for one core and one block.
struct BlockStats {
    std::uint64_t n_z_mu1 = 0, m_z_mu1 = 0;  // key-basis detections/errors, signal intensity
    std::uint64_t n_z_mu2 = 0, m_z_mu2 = 0;  // key-basis detections/errors, decoy intensity
    std::uint64_t n_x_mu1 = 0, m_x_mu1 = 0;  // check-basis detections/errors, signal intensity
    std::uint64_t n_x_mu2 = 0, m_x_mu2 = 0;  // check-basis detections/errors, decoy intensity
    std::uint64_t pulses_sent = 0;
    double t_acq_s = 0.0;

    std::uint64_t n_z() const { return n_z_mu1 + n_z_mu2; }
    std::uint64_t m_z() const { return m_z_mu1 + m_z_mu2; }
    std::uint64_t n_x() const { return n_x_mu1 + n_x_mu2; }
    std::uint64_t m_x() const { return m_x_mu1 + m_x_mu2; }
    double qber_z() const { return n_z() ? static_cast<double>(m_z()) / static_cast<double>(n_z()) : 0.0; }
    double qber_x() const { return n_x() ? static_cast<double>(m_x()) / static_cast<double>(n_x()) : 0.0; }

    bool operator==(const BlockStats&) const = default;
};

namespace detail {

inline void require(std::vector<std::string>& errs, bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
}

}  // namespace detail

inline std::vector<std::string> validation_errors(const ProtocolParams& p) {
    using detail::require;
    std::vector<std::string> e;
    require(e, p.clock_hz > 0.0, "protocol.clock_hz must be positive");
    require(e, p.wavelength_nm > 0.0, "protocol.wavelength_nm must be positive");
    require(e, p.mu1 > 0.0 && p.mu1 < 1.0, "protocol.mu1 must be in (0, 1)");
    require(e, p.mu2 > 0.0 && p.mu2 < 1.0, "protocol.mu2 must be in (0, 1)");
    require(e, p.mu2 < p.mu1, "protocol.mu2 must be strictly below mu1 (decoy method degenerate otherwise)");
    require(e, p.p_mu1 > 0.0 && p.p_mu1 < 1.0, "protocol.p_mu1 must be in (0, 1)");
    require(e, p.p_z_alice > 0.0 && p.p_z_alice < 1.0, "protocol.p_z_alice must be in (0, 1)");
    require(e, p.eps_sec > 0.0 && p.eps_sec < 1.0, "protocol.eps_sec must be in (0, 1)");
    require(e, p.eps_corr > 0.0 && p.eps_corr < 1.0, "protocol.eps_corr must be in (0, 1)");
    require(e, p.f_ec >= 1.0, "protocol.f_ec must be >= 1");
    return e;
}

inline std::vector<std::string> validation_errors(const ChannelSpec& c) {
    using detail::require;
    std::vector<std::string> e;
    require(e, c.n_cores >= 1, "channel.n_cores must be >= 1");
    require(e, c.length_km >= 0.0, "channel.length_km must be >= 0");
    require(e, c.atten_db_per_km >= 0.0, "channel.atten_db_per_km must be >= 0");
    require(e, c.fan_io_db >= 0.0, "channel.fan_io_db must be >= 0");
    require(e, c.extra_attenuation_db >= 0.0, "channel.extra_attenuation_db must be >= 0");
    const auto n = static_cast<std::size_t>(c.n_cores > 0 ? c.n_cores : 0);
    require(e, c.per_core_excess_db.size() == n,
            "channel.per_core_excess_db must have exactly n_cores entries");
    for (std::size_t i = 0; i < c.per_core_excess_db.size(); ++i)
        require(e, c.per_core_excess_db[i] >= 0.0,
                "channel.per_core_excess_db[" + std::to_string(i) + "] must be >= 0");
    require(e, c.crosstalk_db.size() == n, "channel.crosstalk_db must be an n_cores x n_cores matrix");
    for (std::size_t i = 0; i < c.crosstalk_db.size(); ++i) {
        if (c.crosstalk_db[i].size() != n) {
            e.push_back("channel.crosstalk_db row " + std::to_string(i) + " has wrong length");
            continue;
        }
        for (std::size_t j = 0; j < c.crosstalk_db[i].size(); ++j) {
            if (i == j) continue;  // diagonal sentinel, any value ignored by the model
            require(e, c.crosstalk_db[i][j] >= kMinCrosstalkIsolationDb,
                    "channel.crosstalk_db[" + std::to_string(i) + "][" + std::to_string(j) +
                        "] below the " + std::to_string(static_cast<int>(kMinCrosstalkIsolationDb)) +
                        " dB isolation floor");
        }
    }
    return e;
}

inline std::vector<std::string> validation_errors(const ReceiverSpec& r) {
    using detail::require;
    std::vector<std::string> e;
    require(e, r.eta_bob > 0.0 && r.eta_bob <= 1.0, "receiver.eta_bob must be in (0, 1]");
    require(e, r.eta_det > 0.0 && r.eta_det <= 1.0, "receiver.eta_det must be in (0, 1]");
    require(e, r.basis_split_z > 0.0 && r.basis_split_z < 1.0, "receiver.basis_split_z must be in (0, 1)");
    require(e, r.n_z_detectors >= 1 && r.n_z_detectors <= 4,
            "receiver.n_z_detectors must be between 1 and 4 (1x4 splitter ports)");
    require(e, r.dark_rate_hz >= 0.0, "receiver.dark_rate_hz must be >= 0");
    require(e, r.dead_time_s >= 0.0, "receiver.dead_time_s must be >= 0");
    require(e, r.gate_width_s >= 0.0, "receiver.gate_width_s must be >= 0");
    require(e, r.visibility > 0.0 && r.visibility <= 1.0, "receiver.visibility must be in (0, 1]");
    require(e, r.z_error_prob >= 0.0 && r.z_error_prob <= 0.5, "receiver.z_error_prob must be in [0, 0.5]");
    require(e, r.wdm_insertion_db >= 0.0, "receiver.wdm_insertion_db must be >= 0");
    require(e, r.calibration_scale > 0.0 && r.calibration_scale <= 1.0,
            "receiver.calibration_scale must be in (0, 1]");
    return e;
}

inline std::vector<std::string> validation_errors(const ClassicalChannelSpec& c) {
    using detail::require;
    std::vector<std::string> e;
    require(e, c.bitrate_bps > 0.0, "classical.bitrate_bps must be positive");
    require(e, c.wavelength_nm > 0.0, "classical.wavelength_nm must be positive");
    require(e, c.wdm_extinction_db >= 0.0, "classical.wdm_extinction_db must be >= 0");
    require(e, std::isfinite(c.rx_sensitivity_dbm), "classical.rx_sensitivity_dbm must be finite");
    return e;
}

inline std::vector<std::string> validation_errors(const AcquisitionSpec& a) {
    using detail::require;
    std::vector<std::string> e;
    require(e, a.t_acq_s > 0.0, "acquisition.t_acq_s must be positive");
    require(e, a.block_bits > 0.0, "acquisition.block_bits must be positive");
    return e;
}

inline std::vector<std::string> validation_errors(const BlockStats& b) {
    using detail::require;
    std::vector<std::string> e;
    require(e, b.m_z_mu1 <= b.n_z_mu1, "stats: m_z_mu1 exceeds n_z_mu1");
    require(e, b.m_z_mu2 <= b.n_z_mu2, "stats: m_z_mu2 exceeds n_z_mu2");
    require(e, b.m_x_mu1 <= b.n_x_mu1, "stats: m_x_mu1 exceeds n_x_mu1");
    require(e, b.m_x_mu2 <= b.n_x_mu2, "stats: m_x_mu2 exceeds n_x_mu2");
    require(e, b.t_acq_s > 0.0, "stats: t_acq_s must be positive");
    return e;
}

template <typename Spec>
void validate(const Spec& s) {
    auto errs = validation_errors(s);
    if (errs.empty()) return;
    std::ostringstream msg;
    msg << "invalid configuration (" << errs.size() << " problem" << (errs.size() == 1 ? "" : "s") << "):";
    for (const auto& m : errs) msg << "\n  - " << m;
    throw ConfigError(msg.str());
}

// Total optical loss seen by one core, transmitter output to detector input:
// fibre + fan-in/fan-out + per-core spread + variable attenuator + demux filter.
inline double effective_core_loss(const ChannelSpec& chan, int core, const ReceiverSpec& rx) {
    if (core < 0 || core >= chan.n_cores ||
        static_cast<std::size_t>(core) >= chan.per_core_excess_db.size())
        throw std::out_of_range("effective_core_loss: core index out of range");
    return chan.length_km * chan.atten_db_per_km + chan.fan_io_db +
           chan.per_core_excess_db[static_cast<std::size_t>(core)] +
           chan.extra_attenuation_db + rx.wdm_insertion_db;
}

}  // namespace sdmqkd
