#pragma once

// On-disk formats: the per-core counting-statistics CSV (write and replay),
// the run manifest stamped next to every output set, and the packed key-file
// container. Field-level layout is specified in docs/formats.md; readers here
// reject malformed input with the offending line number.

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "model.hpp"
#include "sdm.hpp"

namespace sdmqkd {

struct CoreBlockRecord {
    int core_id = 0;
    BlockStats stats;

    bool operator==(const CoreBlockRecord&) const = default;
};

namespace detail {

inline std::string fmt_g(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

}  // namespace detail

// Counting-statistics CSV, one row per core. Acquisition time round-trips at
// full double precision; counts are raw integers.
inline void write_stats_csv(std::ostream& out, const std::vector<CoreBlockRecord>& records) {
    out << "# sifted counting statistics, one row per core\n"
        << "# n_*: detections [counts], m_*: errors [counts], t_acq_s [s]\n"
        << "core_id,pulses_sent,t_acq_s,n_z_mu1,m_z_mu1,n_z_mu2,m_z_mu2,"
           "n_x_mu1,m_x_mu1,n_x_mu2,m_x_mu2\n";
    for (const auto& r : records) {
        const auto& s = r.stats;
        out << r.core_id << ',' << s.pulses_sent << ',' << detail::fmt_g(s.t_acq_s, 17) << ','
            << s.n_z_mu1 << ',' << s.m_z_mu1 << ',' << s.n_z_mu2 << ',' << s.m_z_mu2 << ','
            << s.n_x_mu1 << ',' << s.m_x_mu1 << ',' << s.n_x_mu2 << ',' << s.m_x_mu2 << '\n';
    }
}

inline void write_stats_csv(const std::string& path, const std::vector<CoreBlockRecord>& records) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write stats file: " + path);
    write_stats_csv(out, records);
}

inline std::vector<CoreBlockRecord> read_stats_csv(std::istream& in) {
    std::vector<CoreBlockRecord> records;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    auto fail = [&line_no](const std::string& why) {
        throw ConfigError("stats file line " + std::to_string(line_no) + ": " + why);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            // First non-comment line is the column header.
            if (line.rfind("core_id,", 0) != 0) fail("expected the column header row");
            header_seen = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 11) fail("expected 11 columns, got " + std::to_string(cells.size()));

        CoreBlockRecord r;
        try {
            std::size_t used = 0;
            r.core_id = std::stoi(cells[0], &used);
            if (used != cells[0].size()) fail("core_id is not an integer");
            r.stats.pulses_sent = std::stoull(cells[1]);
            r.stats.t_acq_s = std::stod(cells[2]);
            r.stats.n_z_mu1 = std::stoull(cells[3]);
            r.stats.m_z_mu1 = std::stoull(cells[4]);
            r.stats.n_z_mu2 = std::stoull(cells[5]);
            r.stats.m_z_mu2 = std::stoull(cells[6]);
            r.stats.n_x_mu1 = std::stoull(cells[7]);
            r.stats.m_x_mu1 = std::stoull(cells[8]);
            r.stats.n_x_mu2 = std::stoull(cells[9]);
            r.stats.m_x_mu2 = std::stoull(cells[10]);
        } catch (const std::exception&) {
            fail("unparseable numeric field");
        }
        if (r.core_id < 0) fail("core_id must be >= 0");
        for (const auto& msg : validation_errors(r.stats)) fail(msg);
        records.push_back(r);
    }
    if (!header_seen) {
        line_no = 1;
        fail("missing column header row");
    }
    return records;
}

inline std::vector<CoreBlockRecord> read_stats_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open stats file: " + path);
    return read_stats_csv(in);
}

// Provenance record written next to every output set.
struct RunManifest {
    std::string command;             // subcommand name
    std::vector<std::string> argv;   // full invocation
    std::string config_digest_hex;   // digest of the effective configuration
    std::uint64_t master_seed = 0;
    std::string mode;                // "analytic" or "monte-carlo"
    std::string started_utc;
    std::string finished_utc;
    std::vector<std::string> outputs;
    double calibration_scale = 1.0;
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
    j = nlohmann::json{{"command", m.command},
                       {"argv", m.argv},
                       {"config_digest", m.config_digest_hex},
                       {"master_seed", m.master_seed},
                       {"mode", m.mode},
                       {"started_utc", m.started_utc},
                       {"finished_utc", m.finished_utc},
                       {"outputs", m.outputs},
                       {"calibration_scale", m.calibration_scale}};
}

inline void from_json(const nlohmann::json& j, RunManifest& m) {
    j.at("command").get_to(m.command);
    j.at("argv").get_to(m.argv);
    j.at("config_digest").get_to(m.config_digest_hex);
    j.at("master_seed").get_to(m.master_seed);
    j.at("mode").get_to(m.mode);
    j.at("started_utc").get_to(m.started_utc);
    j.at("finished_utc").get_to(m.finished_utc);
    j.at("outputs").get_to(m.outputs);
    j.at("calibration_scale").get_to(m.calibration_scale);
}

inline std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string digest_hex(std::uint64_t digest) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

inline void save_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write manifest: " + path);
    out << nlohmann::json(m).dump(2) << '\n';
}

// Packed key container. Little-endian throughout:
//   8-byte magic "SDMQKDKY", u32 version, u32 record count,
//   then per record: u32 core_id, u64 length in bits, payload bytes
//   (LSB-first bit order, last byte zero-padded).
inline constexpr char kKeyFileMagic[9] = "SDMQKDKY";
inline constexpr std::uint32_t kKeyFileVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

inline std::uint32_t take_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ConfigError("key file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t take_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw ConfigError("key file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace detail

inline void write_key_file(const std::string& path, const std::vector<CoreKey>& keys) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write key file: " + path);
    out.write(kKeyFileMagic, 8);
    detail::put_u32(out, kKeyFileVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(keys.size()));
    for (const auto& k : keys) {
        detail::put_u32(out, static_cast<std::uint32_t>(k.core_id));
        detail::put_u64(out, k.length_bits);
        out.write(reinterpret_cast<const char*>(k.bits.data()),
                  static_cast<std::streamsize>(k.bits.size()));
    }
}

inline std::vector<CoreKey> read_key_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open key file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != std::string(kKeyFileMagic, 8))
        throw ConfigError("key file " + path + " has a wrong magic header");
    const std::uint32_t version = detail::take_u32(in);
    if (version != kKeyFileVersion)
        throw ConfigError("key file version " + std::to_string(version) + " is not supported");
    const std::uint32_t count = detail::take_u32(in);

    std::vector<CoreKey> keys;
    keys.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CoreKey k;
        k.core_id = static_cast<int>(detail::take_u32(in));
        k.length_bits = detail::take_u64(in);
        k.bits.resize(static_cast<std::size_t>((k.length_bits + 7) / 8));
        in.read(reinterpret_cast<char*>(k.bits.data()),
                static_cast<std::streamsize>(k.bits.size()));
        if (!in) throw ConfigError("key file truncated inside record " + std::to_string(i));
        keys.push_back(std::move(k));
    }
    return keys;
}

// The multiplexed stream reuses the container with a single record under a
// sentinel id; the per-core layout goes to a text sidecar.
inline constexpr int kMultiplexedRecordId = -1;

inline void write_multiplexed_key(const std::string& path, const MultiplexedKey& mk) {
    CoreKey carrier;
    carrier.core_id = kMultiplexedRecordId;
    carrier.length_bits = mk.total_bits;
    carrier.bits = mk.bits;
    write_key_file(path, {carrier});

    std::ofstream side(path + ".manifest");
    if (!side) throw ConfigError("cannot write key manifest: " + path + ".manifest");
    side << "# multiplexed key layout: core_id offset_bits length_bits\n";
    for (const auto& e : mk.manifest)
        side << e.core_id << ' ' << e.offset_bits << ' ' << e.length_bits << '\n';
}

}  // namespace sdmqkd
