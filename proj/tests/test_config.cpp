#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "sdmqkd/config.hpp"

using Catch::Approx;
using namespace sdmqkd;

namespace {

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("default configuration is valid", "[config]") {
    SystemConfig cfg;
    CHECK(validation_errors(cfg).empty());
    CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("JSON round trip preserves the configuration", "[config]") {
    SystemConfig cfg;
    cfg.receiver.dark_rate_hz = 50.0;
    cfg.receiver.visibility = 0.955;
    cfg.channel.extra_attenuation_db = 1.25;
    cfg.calibration.target_z_detections_per_s = 5108108.108108108;

    const nlohmann::json j = cfg;
    const SystemConfig back = parse_config(j);

    CHECK(back.receiver.dark_rate_hz == 50.0);
    CHECK(back.receiver.visibility == 0.955);
    CHECK(back.channel.extra_attenuation_db == 1.25);
    CHECK(back.calibration.target_z_detections_per_s == 5108108.108108108);
    CHECK(back.channel.per_core_excess_db == cfg.channel.per_core_excess_db);
    // Diagonal infinity survives the null encoding.
    CHECK(std::isinf(back.channel.crosstalk_db[0][0]));
    CHECK(back.channel.crosstalk_db[0][1] == 60.0);
    CHECK(config_digest(back) == config_digest(cfg));
}

TEST_CASE("partial configs keep defaults and resize companions", "[config]") {
    const auto j = nlohmann::json::parse(R"({
        "channel": {"n_cores": 3},
        "receiver": {"dark_rate_hz": 25.0}
    })");
    const SystemConfig cfg = parse_config(j);
    CHECK(cfg.channel.n_cores == 3);
    CHECK(cfg.channel.per_core_excess_db.size() == 3);
    CHECK(cfg.channel.crosstalk_db.size() == 3);
    CHECK(cfg.channel.crosstalk_db[2].size() == 3);
    CHECK(cfg.receiver.dark_rate_hz == 25.0);
    CHECK(cfg.protocol.clock_hz == 595e6);  // untouched default
    // Reduced table reuses the same seeded draw, so it is a prefix.
    const auto full = ChannelSpec::default_excess(37, 0.5, kDefaultExcessSeed);
    CHECK(cfg.channel.per_core_excess_db[0] == full[0]);
    CHECK(cfg.channel.per_core_excess_db[2] == full[2]);
}

TEST_CASE("crosstalk shorthand and matrix forms", "[config]") {
    SECTION("uniform shorthand") {
        const auto j = nlohmann::json::parse(R"({
            "channel": {"n_cores": 4, "crosstalk_db": {"uniform_isolation_db": 55.0}}
        })");
        const SystemConfig cfg = parse_config(j);
        CHECK(cfg.channel.crosstalk_db[1][3] == 55.0);
        CHECK(std::isinf(cfg.channel.crosstalk_db[2][2]));
    }
    SECTION("explicit matrix with null diagonal") {
        const auto j = nlohmann::json::parse(R"({
            "channel": {"n_cores": 2,
                        "per_core_excess_db": [0.1, 0.2],
                        "crosstalk_db": {"matrix": [[null, 48.0], [52.0, null]]}}
        })");
        const SystemConfig cfg = parse_config(j);
        CHECK(cfg.channel.crosstalk_db[0][1] == 48.0);
        CHECK(cfg.channel.crosstalk_db[1][0] == 52.0);
        CHECK(std::isinf(cfg.channel.crosstalk_db[0][0]));
    }
    SECTION("neither key present") {
        const auto j = nlohmann::json::parse(R"({
            "channel": {"crosstalk_db": {"isolation": 60.0}}
        })");
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
}

TEST_CASE("cross-field validation", "[config]") {
    SECTION("gate wider than the clock period") {
        nlohmann::json j;
        j["receiver"]["gate_width_s"] = 3e-9;  // 1.785 slots at 595 MHz
        try {
            parse_config(j);
            FAIL("expected a ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("more than one clock period") != std::string::npos);
        }
    }
    SECTION("absurd dead time") {
        nlohmann::json j;
        j["receiver"]["dead_time_s"] = 0.01;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SECTION("negative calibration target") {
        nlohmann::json j;
        j["calibration"]["target_z_detections_per_s"] = -1.0;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SECTION("several problems are reported together") {
        nlohmann::json j;
        j["protocol"]["mu2"] = 0.5;   // above mu1
        j["receiver"]["eta_det"] = 1.5;
        try {
            parse_config(j);
            FAIL("expected a ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("2 problems") != std::string::npos);
        }
    }
}

TEST_CASE("config files", "[config]") {
    const auto path = temp_file("sdmqkd_test_config.json");

    SECTION("save and reload") {
        SystemConfig cfg;
        cfg.receiver.visibility = 0.955;
        save_config(cfg, path.string());
        const SystemConfig back = load_config(path.string());
        CHECK(back.receiver.visibility == 0.955);
        CHECK(config_digest(back) == config_digest(cfg));
        std::filesystem::remove(path);
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(load_config("/nonexistent/nowhere.json"), ConfigError);
    }
    SECTION("broken JSON") {
        std::ofstream(path) << "{ not json";
        try {
            load_config(path.string());
            FAIL("expected a ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("not valid JSON") != std::string::npos);
        }
        std::filesystem::remove(path);
    }
    SECTION("wrongly typed field") {
        std::ofstream(path) << R"({"receiver": {"dark_rate_hz": "fifty"}})";
        try {
            load_config(path.string());
            FAIL("expected a ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("wrongly typed") != std::string::npos);
        }
        std::filesystem::remove(path);
    }
}

TEST_CASE("configuration digest", "[config]") {
    SystemConfig a, b;
    CHECK(config_digest(a) == config_digest(b));
    b.receiver.dark_rate_hz = 51.0;
    CHECK(config_digest(a) != config_digest(b));
}
