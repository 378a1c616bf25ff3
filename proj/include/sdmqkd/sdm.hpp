#pragma once

// Per-core key material and the spatial-multiplexing bookkeeping that glues
// 37 independent key streams into one keystore.
//
// The bits produced here are placeholder key material drawn from a seeded
// PRNG, sized by the finite-key analysis. They demonstrate formats and
// throughput only and must never be used as cryptographic keys.

#include <cstdint>
#include <string>
#include <vector>

#include "finitekey.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "simulator.hpp"

namespace sdmqkd {

struct CoreKey {
    int core_id = 0;
    std::uint64_t length_bits = 0;
    std::vector<std::uint8_t> bits;  // packed LSB-first, last byte zero-padded

    bool bit(std::uint64_t i) const {
        return (bits[static_cast<std::size_t>(i >> 3)] >> (i & 7)) & 1u;
    }
};

// Materialize the extractable key of one analyzed block as placeholder bits.
// A key as long as the sifted string would mean the privacy amplification
// stage compressed nothing, so that is rejected as an internal inconsistency.
inline CoreKey extract_core_key(const TaggedBlockStats& block, const FiniteKeyResult& key,
                                std::uint64_t seed, int core_id) {
    const auto n_z = block.stats.n_z();
    const auto len = static_cast<std::uint64_t>(key.secret_bits);
    if (n_z > 0 && len >= n_z)
        throw ConfigError("extract_core_key: secret length " + std::to_string(len) +
                          " is not below the sifted count " + std::to_string(n_z));

    CoreKey k;
    k.core_id = core_id;
    k.length_bits = len;
    k.bits.assign(static_cast<std::size_t>((len + 7) / 8), 0);
    std::mt19937_64 gen(core_stream_seed(seed, core_id));
    std::uint64_t word = 0;
    for (std::uint64_t i = 0; i < len; ++i) {
        if ((i & 63) == 0) word = gen();
        const std::uint64_t b = (word >> (i & 63)) & 1u;
        k.bits[static_cast<std::size_t>(i >> 3)] |= static_cast<std::uint8_t>(b << (i & 7));
    }
    return k;
}

struct MultiplexManifestEntry {
    int core_id = 0;
    std::uint64_t offset_bits = 0;  // position of this core's first bit in the stream
    std::uint64_t length_bits = 0;
};

struct MultiplexedKey {
    std::vector<std::uint8_t> bits;  // packed LSB-first
    std::vector<MultiplexManifestEntry> manifest;
    std::uint64_t total_bits = 0;

    bool bit(std::uint64_t i) const {
        return (bits[static_cast<std::size_t>(i >> 3)] >> (i & 7)) & 1u;
    }
};

// Concatenate per-core keys into one bit stream, preserving input order and
// recording where each core's slice starts. Entries are not byte-aligned.
inline MultiplexedKey multiplex(const std::vector<CoreKey>& keys) {
    MultiplexedKey out;
    for (const auto& k : keys) {
        for (const auto& e : out.manifest)
            if (e.core_id == k.core_id)
                throw ConfigError("multiplex: duplicate core id " + std::to_string(k.core_id));
        out.manifest.push_back({k.core_id, out.total_bits, k.length_bits});
        const std::uint64_t shift = out.total_bits & 7;
        out.bits.resize(static_cast<std::size_t>((out.total_bits + k.length_bits + 7) / 8), 0);
        if (shift == 0) {
            for (std::uint64_t i = 0; i < (k.length_bits + 7) / 8; ++i)
                out.bits[static_cast<std::size_t>((out.total_bits >> 3) + i)] =
                    k.bits[static_cast<std::size_t>(i)];
            // Mask stray padding bits from the source's last byte.
            const std::uint64_t tail = k.length_bits & 7;
            if (tail != 0)
                out.bits.back() &= static_cast<std::uint8_t>((1u << tail) - 1u);
        } else {
            for (std::uint64_t i = 0; i < k.length_bits; ++i) {
                const std::uint64_t pos = out.total_bits + i;
                if (k.bit(i))
                    out.bits[static_cast<std::size_t>(pos >> 3)] |=
                        static_cast<std::uint8_t>(1u << (pos & 7));
            }
        }
        out.total_bits += k.length_bits;
    }
    return out;
}

// Deployment-scale throughput projection: per-core secret rate times core
// count times duration. Kept as one multiplication chain so callers get the
// exact double product.
inline double projection_bits(double per_core_rate_bps, int n_cores, double seconds) {
    if (n_cores < 1) throw ConfigError("projection_bits: n_cores must be >= 1");
    if (!(per_core_rate_bps >= 0.0) || !(seconds >= 0.0))
        throw ConfigError("projection_bits: rate and duration must be >= 0");
    return per_core_rate_bps * static_cast<double>(n_cores) * seconds;
}

}  // namespace sdmqkd
