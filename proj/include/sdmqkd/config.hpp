#pragma once

// JSON (de)serialization of the full system configuration, plus a stable
// digest used to stamp output manifests. Missing JSON fields keep their
// defaults, so a preset only needs to spell out what it overrides.

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "model.hpp"

namespace sdmqkd {

struct SystemConfig {
    ProtocolParams protocol;
    ChannelSpec channel;
    ReceiverSpec receiver;
    ClassicalChannelSpec classical;
    AcquisitionSpec acquisition;
    CalibrationSpec calibration;
};

namespace detail {

template <typename T>
void get_opt(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const ProtocolParams& p) {
    j = nlohmann::json{{"clock_hz", p.clock_hz},   {"wavelength_nm", p.wavelength_nm},
                       {"mu1", p.mu1},             {"mu2", p.mu2},
                       {"p_mu1", p.p_mu1},         {"p_z_alice", p.p_z_alice},
                       {"eps_sec", p.eps_sec},     {"eps_corr", p.eps_corr},
                       {"f_ec", p.f_ec}};
}

inline void from_json(const nlohmann::json& j, ProtocolParams& p) {
    using detail::get_opt;
    get_opt(j, "clock_hz", p.clock_hz);
    get_opt(j, "wavelength_nm", p.wavelength_nm);
    get_opt(j, "mu1", p.mu1);
    get_opt(j, "mu2", p.mu2);
    get_opt(j, "p_mu1", p.p_mu1);
    get_opt(j, "p_z_alice", p.p_z_alice);
    get_opt(j, "eps_sec", p.eps_sec);
    get_opt(j, "eps_corr", p.eps_corr);
    get_opt(j, "f_ec", p.f_ec);
}

inline void to_json(nlohmann::json& j, const ChannelSpec& c) {
    // The crosstalk matrix serializes with null on the diagonal (JSON has no
    // infinity); a uniform matrix could also be written by hand with the
    // {"uniform_isolation_db": x} shorthand.
    nlohmann::json xt = nlohmann::json::array();
    for (std::size_t i = 0; i < c.crosstalk_db.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t k = 0; k < c.crosstalk_db[i].size(); ++k) {
            if (std::isinf(c.crosstalk_db[i][k]))
                row.push_back(nullptr);
            else
                row.push_back(c.crosstalk_db[i][k]);
        }
        xt.push_back(std::move(row));
    }
    j = nlohmann::json{{"n_cores", c.n_cores},
                       {"length_km", c.length_km},
                       {"atten_db_per_km", c.atten_db_per_km},
                       {"fan_io_db", c.fan_io_db},
                       {"extra_attenuation_db", c.extra_attenuation_db},
                       {"per_core_excess_db", c.per_core_excess_db},
                       {"crosstalk_db", {{"matrix", std::move(xt)}}}};
}

inline void from_json(const nlohmann::json& j, ChannelSpec& c) {
    using detail::get_opt;
    get_opt(j, "n_cores", c.n_cores);
    get_opt(j, "length_km", c.length_km);
    get_opt(j, "atten_db_per_km", c.atten_db_per_km);
    get_opt(j, "fan_io_db", c.fan_io_db);
    get_opt(j, "extra_attenuation_db", c.extra_attenuation_db);

    // Resize the defaulted companions when n_cores changes and the file does
    // not spell them out itself.
    if (c.n_cores >= 1 && c.per_core_excess_db.size() != static_cast<std::size_t>(c.n_cores))
        c.per_core_excess_db = ChannelSpec::default_excess(c.n_cores, 0.5, kDefaultExcessSeed);
    if (c.n_cores >= 1 && c.crosstalk_db.size() != static_cast<std::size_t>(c.n_cores))
        c.crosstalk_db = ChannelSpec::uniform_crosstalk(c.n_cores, 60.0);

    get_opt(j, "per_core_excess_db", c.per_core_excess_db);

    if (auto it = j.find("crosstalk_db"); it != j.end() && !it->is_null()) {
        if (auto u = it->find("uniform_isolation_db"); u != it->end()) {
            c.crosstalk_db = ChannelSpec::uniform_crosstalk(c.n_cores, u->get<double>());
        } else if (auto m = it->find("matrix"); m != it->end()) {
            c.crosstalk_db.clear();
            for (const auto& jrow : *m) {
                std::vector<double> row;
                row.reserve(jrow.size());
                for (const auto& v : jrow)
                    row.push_back(v.is_null() ? std::numeric_limits<double>::infinity()
                                              : v.get<double>());
                c.crosstalk_db.push_back(std::move(row));
            }
        } else {
            throw ConfigError(
                "channel.crosstalk_db must contain either \"uniform_isolation_db\" or \"matrix\"");
        }
    }
}

inline void to_json(nlohmann::json& j, const ReceiverSpec& r) {
    j = nlohmann::json{{"eta_bob", r.eta_bob},
                       {"eta_det", r.eta_det},
                       {"basis_split_z", r.basis_split_z},
                       {"n_z_detectors", r.n_z_detectors},
                       {"dark_rate_hz", r.dark_rate_hz},
                       {"dead_time_s", r.dead_time_s},
                       {"gate_width_s", r.gate_width_s},
                       {"visibility", r.visibility},
                       {"z_error_prob", r.z_error_prob},
                       {"wdm_insertion_db", r.wdm_insertion_db},
                       {"calibration_scale", r.calibration_scale}};
}

inline void from_json(const nlohmann::json& j, ReceiverSpec& r) {
    using detail::get_opt;
    get_opt(j, "eta_bob", r.eta_bob);
    get_opt(j, "eta_det", r.eta_det);
    get_opt(j, "basis_split_z", r.basis_split_z);
    get_opt(j, "n_z_detectors", r.n_z_detectors);
    get_opt(j, "dark_rate_hz", r.dark_rate_hz);
    get_opt(j, "dead_time_s", r.dead_time_s);
    get_opt(j, "gate_width_s", r.gate_width_s);
    get_opt(j, "visibility", r.visibility);
    get_opt(j, "z_error_prob", r.z_error_prob);
    get_opt(j, "wdm_insertion_db", r.wdm_insertion_db);
    get_opt(j, "calibration_scale", r.calibration_scale);
}

inline void to_json(nlohmann::json& j, const ClassicalChannelSpec& c) {
    j = nlohmann::json{{"bitrate_bps", c.bitrate_bps},
                       {"wavelength_nm", c.wavelength_nm},
                       {"rx_power_dbm", c.rx_power_dbm},
                       {"wdm_extinction_db", c.wdm_extinction_db},
                       {"rx_sensitivity_dbm", c.rx_sensitivity_dbm}};
}

inline void from_json(const nlohmann::json& j, ClassicalChannelSpec& c) {
    using detail::get_opt;
    get_opt(j, "bitrate_bps", c.bitrate_bps);
    get_opt(j, "wavelength_nm", c.wavelength_nm);
    get_opt(j, "rx_power_dbm", c.rx_power_dbm);
    get_opt(j, "wdm_extinction_db", c.wdm_extinction_db);
    get_opt(j, "rx_sensitivity_dbm", c.rx_sensitivity_dbm);
}

inline void to_json(nlohmann::json& j, const AcquisitionSpec& a) {
    j = nlohmann::json{{"t_acq_s", a.t_acq_s}, {"block_bits", a.block_bits}};
}

inline void from_json(const nlohmann::json& j, AcquisitionSpec& a) {
    using detail::get_opt;
    get_opt(j, "t_acq_s", a.t_acq_s);
    get_opt(j, "block_bits", a.block_bits);
}

inline void to_json(nlohmann::json& j, const CalibrationSpec& c) {
    j = nlohmann::json{{"target_z_detections_per_s", c.target_z_detections_per_s}};
}

inline void from_json(const nlohmann::json& j, CalibrationSpec& c) {
    detail::get_opt(j, "target_z_detections_per_s", c.target_z_detections_per_s);
}

inline void to_json(nlohmann::json& j, const SystemConfig& s) {
    j = nlohmann::json{{"protocol", s.protocol},       {"channel", s.channel},
                       {"receiver", s.receiver},       {"classical", s.classical},
                       {"acquisition", s.acquisition}, {"calibration", s.calibration}};
}

inline void from_json(const nlohmann::json& j, SystemConfig& s) {
    using detail::get_opt;
    get_opt(j, "protocol", s.protocol);
    get_opt(j, "channel", s.channel);
    get_opt(j, "receiver", s.receiver);
    get_opt(j, "classical", s.classical);
    get_opt(j, "acquisition", s.acquisition);
    get_opt(j, "calibration", s.calibration);
}

// Validation across struct boundaries, on top of the per-struct rules.
inline std::vector<std::string> validation_errors(const SystemConfig& s) {
    std::vector<std::string> e;
    auto merge = [&e](std::vector<std::string> v) {
        e.insert(e.end(), v.begin(), v.end());
    };
    merge(validation_errors(s.protocol));
    merge(validation_errors(s.channel));
    merge(validation_errors(s.receiver));
    merge(validation_errors(s.classical));
    merge(validation_errors(s.acquisition));
    if (s.calibration.target_z_detections_per_s < 0.0)
        e.push_back("calibration.target_z_detections_per_s must be >= 0 (0 disables calibration)");
    if (s.protocol.clock_hz > 0.0 && s.receiver.gate_width_s * s.protocol.clock_hz > 1.0)
        e.push_back("receiver.gate_width_s covers more than one clock period");
    if (s.protocol.clock_hz > 0.0 && s.receiver.dead_time_s * s.protocol.clock_hz > 1e6)
        e.push_back("receiver.dead_time_s spans over 1e6 clock periods; check the units");
    return e;
}

inline SystemConfig parse_config(const nlohmann::json& j) {
    SystemConfig cfg = j.get<SystemConfig>();
    validate(cfg);
    return cfg;
}

inline SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("config file " + path + " is not valid JSON: " + ex.what());
    }
    try {
        return parse_config(j);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("config file " + path + " has a wrongly typed field: " + ex.what());
    }
}

inline void save_config(const SystemConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file: " + path);
    out << nlohmann::json(cfg).dump(2) << '\n';
}

// FNV-1a over the canonical serialized form. Stable across runs and
// platforms, good enough to tell two configurations apart in a manifest.
inline std::uint64_t config_digest(const SystemConfig& cfg) {
    const std::string s = nlohmann::json(cfg).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace sdmqkd
