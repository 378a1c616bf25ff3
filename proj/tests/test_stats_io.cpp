#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sdmqkd/config.hpp"
#include "sdmqkd/sdm.hpp"
#include "sdmqkd/stats_io.hpp"

using Catch::Matchers::ContainsSubstring;
using namespace sdmqkd;

namespace {

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

CoreBlockRecord record(int core) {
    CoreBlockRecord r;
    r.core_id = core;
    r.stats.n_z_mu1 = 105797117 + static_cast<std::uint64_t>(core);
    r.stats.m_z_mu1 = 710331;
    r.stats.n_z_mu2 = 28904634;
    r.stats.m_z_mu2 = 194302;
    r.stats.n_x_mu1 = 1359325;
    r.stats.m_x_mu1 = 30608;
    r.stats.n_x_mu2 = 370808;
    r.stats.m_x_mu2 = 8353;
    r.stats.pulses_sent = 17850000000ULL;
    r.stats.t_acq_s = 29.847123456789012;  // needs all 17 digits to survive
    return r;
}

}  // namespace

TEST_CASE("counting statistics round trip through CSV", "[stats_io]") {
    const std::vector<CoreBlockRecord> records = {record(0), record(3)};
    std::stringstream ss;
    write_stats_csv(ss, records);

    const auto back = read_stats_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == records[0]);
    CHECK(back[1] == records[1]);
    CHECK(back[1].stats.t_acq_s == 29.847123456789012);
}

TEST_CASE("stats reader rejects malformed input with line numbers", "[stats_io]") {
    const std::string header =
        "core_id,pulses_sent,t_acq_s,n_z_mu1,m_z_mu1,n_z_mu2,m_z_mu2,"
        "n_x_mu1,m_x_mu1,n_x_mu2,m_x_mu2\n";

    SECTION("wrong column count") {
        std::stringstream ss("# comment\n" + header + "0,1,1.0,10,1,5,1,2,0\n");
        CHECK_THROWS_WITH(read_stats_csv(ss),
                          ContainsSubstring("line 3") && ContainsSubstring("11 columns"));
    }
    SECTION("non-numeric cell") {
        std::stringstream ss(header + "0,1,abc,10,1,5,1,2,0,1,0\n");
        CHECK_THROWS_WITH(read_stats_csv(ss), ContainsSubstring("unparseable"));
    }
    SECTION("negative core id") {
        std::stringstream ss(header + "-2,1,1.0,10,1,5,1,2,0,1,0\n");
        CHECK_THROWS_WITH(read_stats_csv(ss), ContainsSubstring("core_id"));
    }
    SECTION("errors above detections") {
        std::stringstream ss(header + "0,1,1.0,10,11,5,1,2,0,1,0\n");
        CHECK_THROWS_WITH(read_stats_csv(ss), ContainsSubstring("m_z_mu1"));
    }
    SECTION("missing header") {
        std::stringstream ss("0,1,1.0,10,1,5,1,2,0,1,0\n");
        CHECK_THROWS_AS(read_stats_csv(ss), ConfigError);
    }
    SECTION("comments and blank lines are fine") {
        std::stringstream ss("# a\n\n" + header + "# b\n0,1,1.0,10,1,5,1,2,0,1,0\n\n");
        const auto recs = read_stats_csv(ss);
        REQUIRE(recs.size() == 1);
        CHECK(recs[0].stats.n_z_mu1 == 10);
    }
}

TEST_CASE("run manifest", "[stats_io]") {
    RunManifest m;
    m.command = "simulate";
    m.argv = {"sdmqkd", "--config", "x.json", "simulate"};
    m.config_digest_hex = digest_hex(0x1234);
    m.master_seed = 77;
    m.mode = "monte-carlo";
    m.started_utc = utc_timestamp();
    m.finished_utc = utc_timestamp();
    m.outputs = {"simulate.csv", "stats.csv"};
    m.calibration_scale = 0.57;

    CHECK(m.config_digest_hex == "0000000000001234");

    const nlohmann::json j = m;
    const RunManifest back = j.get<RunManifest>();
    CHECK(back.command == m.command);
    CHECK(back.argv == m.argv);
    CHECK(back.config_digest_hex == m.config_digest_hex);
    CHECK(back.master_seed == 77);
    CHECK(back.mode == "monte-carlo");
    CHECK(back.outputs == m.outputs);
    CHECK(back.calibration_scale == 0.57);

    SECTION("timestamp shape") {
        const auto ts = utc_timestamp();
        REQUIRE(ts.size() == 20);
        CHECK(ts[4] == '-');
        CHECK(ts[10] == 'T');
        CHECK(ts[19] == 'Z');
    }
    SECTION("file round trip") {
        const auto path = temp_file("sdmqkd_test_manifest.json");
        save_manifest(m, path.string());
        std::ifstream in(path);
        nlohmann::json loaded;
        in >> loaded;
        CHECK(loaded.get<RunManifest>().master_seed == 77);
        std::filesystem::remove(path);
    }
}

TEST_CASE("key container round trip", "[stats_io]") {
    TaggedBlockStats block;
    block.stats.n_z_mu1 = 100000;
    block.stats.t_acq_s = 1.0;
    FiniteKeyResult fk;

    std::vector<CoreKey> keys;
    fk.secret_bits = 0;
    keys.push_back(extract_core_key(block, fk, 5, 0));
    fk.secret_bits = 5;
    keys.push_back(extract_core_key(block, fk, 5, 1));
    fk.secret_bits = 64;
    keys.push_back(extract_core_key(block, fk, 5, 2));

    const auto path = temp_file("sdmqkd_test_keys.bin");
    write_key_file(path.string(), keys);
    const auto back = read_key_file(path.string());
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].core_id == keys[i].core_id);
        CHECK(back[i].length_bits == keys[i].length_bits);
        CHECK(back[i].bits == keys[i].bits);
    }
    std::filesystem::remove(path);
}

TEST_CASE("key container rejects damaged files", "[stats_io]") {
    const auto path = temp_file("sdmqkd_test_damaged.bin");

    SECTION("wrong magic") {
        std::ofstream(path, std::ios::binary) << "NOTAKEYF00000000";
        CHECK_THROWS_WITH(read_key_file(path.string()), ContainsSubstring("magic"));
    }
    SECTION("unsupported version") {
        std::ofstream out(path, std::ios::binary);
        out.write(kKeyFileMagic, 8);
        detail::put_u32(out, 2);
        detail::put_u32(out, 0);
        out.close();
        CHECK_THROWS_WITH(read_key_file(path.string()), ContainsSubstring("version"));
    }
    SECTION("truncated record") {
        TaggedBlockStats block;
        block.stats.n_z_mu1 = 1000;
        block.stats.t_acq_s = 1.0;
        FiniteKeyResult fk;
        fk.secret_bits = 64;
        write_key_file(path.string(), {extract_core_key(block, fk, 1, 0)});
        std::filesystem::resize_file(path, 20);  // cuts into the first record
        CHECK_THROWS_AS(read_key_file(path.string()), ConfigError);
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(read_key_file("/nonexistent/keys.bin"), ConfigError);
    }
    std::filesystem::remove(path);
}

TEST_CASE("multiplexed key file with layout sidecar", "[stats_io]") {
    TaggedBlockStats block;
    block.stats.n_z_mu1 = 100000;
    block.stats.t_acq_s = 1.0;
    FiniteKeyResult fk;
    fk.secret_bits = 21;
    const auto k0 = extract_core_key(block, fk, 3, 0);
    fk.secret_bits = 11;
    const auto k1 = extract_core_key(block, fk, 3, 1);
    const auto mk = multiplex({k0, k1});

    const auto path = temp_file("sdmqkd_test_mux.bin");
    write_multiplexed_key(path.string(), mk);

    const auto back = read_key_file(path.string());
    REQUIRE(back.size() == 1);
    CHECK(back[0].core_id == kMultiplexedRecordId);
    CHECK(back[0].length_bits == 32);
    CHECK(back[0].bits == mk.bits);

    std::ifstream side(path.string() + ".manifest");
    REQUIRE(side.good());
    std::string line;
    std::getline(side, line);  // comment
    std::getline(side, line);
    CHECK(line == "0 0 21");
    std::getline(side, line);
    CHECK(line == "1 21 11");

    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".manifest");
}
