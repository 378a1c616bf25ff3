#pragma once

// Link-budget arithmetic shared by every stage downstream: decibel/linear
// conversion, optical power to photon flux, loss-to-distance mapping, and the
// small information-theory helpers (entropies, Hoeffding deviation).
//
// Public entry points speak dB and dBm; linear values stay internal to the
// callers, which matches the way optical budgets are normally quoted.

#include <cmath>
#include <stdexcept>

namespace sdmqkd {

// Exact SI values (2019 redefinition).
inline constexpr double kPlanckJs = 6.62607015e-34;
inline constexpr double kSpeedOfLightMps = 299792458.0;

// Attenuation in dB to transmissivity in (0, 1]. Gains are rejected: every
// budget term in this model is a loss.
inline double db_to_linear(double loss_db) {
    if (!(loss_db >= 0.0))
        throw std::invalid_argument("db_to_linear: loss must be >= 0 dB");
    return std::pow(10.0, -loss_db / 10.0);
}

inline double linear_to_db(double transmissivity) {
    if (!(transmissivity > 0.0 && transmissivity <= 1.0))
        throw std::invalid_argument("linear_to_db: transmissivity must be in (0, 1]");
    return -10.0 * std::log10(transmissivity);
}

inline double dbm_to_watts(double dbm) {
    return 1e-3 * std::pow(10.0, dbm / 10.0);
}

inline double watts_to_dbm(double watts) {
    if (!(watts > 0.0))
        throw std::invalid_argument("watts_to_dbm: power must be positive");
    return 10.0 * std::log10(watts / 1e-3);
}

inline double photon_energy_j(double wavelength_nm) {
    if (!(wavelength_nm > 0.0))
        throw std::invalid_argument("photon_energy_j: wavelength must be positive");
    return kPlanckJs * kSpeedOfLightMps / (wavelength_nm * 1e-9);
}

// Photons per second carried by an optical power level. -inf dBm maps to 0.
inline double photon_flux_hz(double power_dbm, double wavelength_nm) {
    return dbm_to_watts(power_dbm) / photon_energy_j(wavelength_nm);
}

// Mean photon number per pulse for a pulsed source of the given average power.
inline double power_to_mean_photon_number(double power_dbm, double wavelength_nm,
                                          double clock_hz) {
    if (!(clock_hz > 0.0))
        throw std::invalid_argument("power_to_mean_photon_number: clock must be positive");
    return photon_flux_hz(power_dbm, wavelength_nm) / clock_hz;
}

// Fibre length that realizes a total channel loss once the fixed fan-in/fan-out
// budget is subtracted.
inline double loss_to_distance_km(double channel_loss_db, double fan_io_db,
                                  double coeff_db_per_km) {
    if (!(coeff_db_per_km > 0.0))
        throw std::invalid_argument("loss_to_distance_km: attenuation coefficient must be positive");
    if (channel_loss_db < fan_io_db)
        throw std::invalid_argument(
            "loss_to_distance_km: channel loss below the fixed fan-in/fan-out budget");
    return (channel_loss_db - fan_io_db) / coeff_db_per_km;
}

inline double distance_to_loss_db(double length_km, double fan_io_db,
                                  double coeff_db_per_km) {
    if (!(length_km >= 0.0) || !(coeff_db_per_km > 0.0) || !(fan_io_db >= 0.0))
        throw std::invalid_argument("distance_to_loss_db: negative budget term");
    return length_km * coeff_db_per_km + fan_io_db;
}

// Binary Shannon entropy, h(0) = h(1) = 0 by continuity.
inline double binary_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::domain_error("binary_entropy: argument outside [0, 1]");
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

// d-ary entropy of a symbol error rate q spread uniformly over the d-1 wrong
// symbols: H_d(q) = -q log2(q/(d-1)) - (1-q) log2(1-q).
inline double dary_entropy(double q, int d) {
    if (d < 2)
        throw std::domain_error("dary_entropy: dimension must be >= 2");
    double q_max = 1.0 - 1.0 / static_cast<double>(d);
    if (!(q >= 0.0 && q <= q_max))
        throw std::domain_error("dary_entropy: error rate outside [0, 1-1/d]");
    if (q == 0.0) return 0.0;
    return -q * std::log2(q / (d - 1)) - (1.0 - q) * std::log2(1.0 - q);
}

// One-sided Hoeffding deviation sqrt(n/2 ln(1/eps)); the fluctuation term added
// to or subtracted from observed counts in the finite-key analysis.
inline double hoeffding_delta(double n, double eps) {
    if (!(eps > 0.0 && eps < 1.0))
        throw std::domain_error("hoeffding_delta: eps outside (0, 1)");
    if (!(n >= 0.0))
        throw std::domain_error("hoeffding_delta: negative sample count");
    return std::sqrt(0.5 * n * std::log(1.0 / eps));
}

}  // namespace sdmqkd
