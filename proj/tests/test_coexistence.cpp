#include <catch2/catch_amalgamated.hpp>

#include <limits>

#include "sdmqkd/coexistence.hpp"

using Catch::Approx;
using namespace sdmqkd;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

ChannelSpec channel(int n) {
    ChannelSpec c;
    c.n_cores = n;
    c.per_core_excess_db = ChannelSpec::default_excess(n, 0.5, kDefaultExcessSeed);
    c.crosstalk_db = ChannelSpec::uniform_crosstalk(n, 60.0);
    return c;
}

}  // namespace

TEST_CASE("classical receiver error rate", "[coexistence]") {
    // At the sensitivity point the BER is 1e-9 by definition of the anchor.
    const double at_sens = classical_ber(-34.0, -34.0);
    CHECK(at_sens <= 1e-9);
    CHECK(at_sens > 0.98e-9);

    // 3 dB of margin pushes the Gaussian tail seventeen orders down.
    CHECK(classical_ber(-31.0, -34.0) == Approx(1.2047549673562404e-17).epsilon(1e-9));
    // 3 dB short of sensitivity costs four orders of magnitude.
    CHECK(classical_ber(-37.0, -34.0) == Approx(1.0875102259252994e-05).epsilon(1e-9));

    SECTION("monotone in received power") {
        CHECK(classical_ber(-37.0, -34.0) > classical_ber(-34.0, -34.0));
        CHECK(classical_ber(-34.0, -34.0) > classical_ber(-31.0, -34.0));
    }
    SECTION("no light reads as a coin flip") {
        CHECK(classical_ber(kNegInf, -34.0) == 0.5);
    }
}

TEST_CASE("classical-into-quantum leakage", "[coexistence]") {
    // -34 dBm behind an 80 dB demux at the 1550 nm quantum wavelength,
    // with the 60% detector efficiency folded in.
    CHECK(leakage_background_hz(-34.0, 80.0, 1550.0, 0.6) ==
          Approx(18638.296497350465).epsilon(1e-12));
    CHECK(leakage_background_hz(kNegInf, 80.0, 1550.0, 0.6) == 0.0);
    // 10 dB more extinction, 10 times fewer photons.
    CHECK(leakage_background_hz(-34.0, 90.0, 1550.0, 0.6) ==
          Approx(1863.8296497350465).epsilon(1e-12));
}

TEST_CASE("coexistence background composition", "[coexistence]") {
    ProtocolParams p;
    ReceiverSpec rx;
    const ChannelSpec chan = channel(5);
    ClassicalChannelSpec cl;

    const auto bg = coexistence_backgrounds(p, chan, rx, cl);
    REQUIRE(bg.size() == 5);
    for (int core = 0; core < 5; ++core) {
        // Classical leakage adds on top of the quantum inter-core coupling.
        CHECK(bg[core] > crosstalk_background_rate(p, chan, core, rx));
    }

    SECTION("classical source off reduces to the quantum-only background") {
        ClassicalChannelSpec off = cl;
        off.rx_power_dbm = kNegInf;
        const auto quiet = coexistence_backgrounds(p, chan, rx, off);
        for (int core = 0; core < 5; ++core) {
            CHECK(quiet[core] == crosstalk_background_rate(p, chan, core, rx));
        }
    }
}

TEST_CASE("coexistence run", "[coexistence]") {
    ProtocolParams p;
    ReceiverSpec rx;
    rx.dark_rate_hz = 50.0;
    rx.visibility = 0.955;
    rx.z_error_prob = 0.0067;
    const ChannelSpec chan = channel(3);
    ClassicalChannelSpec cl;

    SECTION("classical light off matches the quantum-only simulation") {
        ClassicalChannelSpec off = cl;
        off.rx_power_dbm = kNegInf;
        const auto mode = SimulationMode::analytic(5.0);
        const auto res = coexistence_run(p, chan, rx, off, mode);
        const auto bare = simulate_sdm(p, chan, rx, mode);
        REQUIRE(res.size() == 3);
        for (int core = 0; core < 3; ++core) {
            CHECK(res[core].block.stats == bare[core].stats);
            CHECK(res[core].classical_ber == 0.5);  // receiver sees nothing
        }
    }
    SECTION("classical light costs key but only mildly") {
        const auto mode = SimulationMode::analytic(20.0);
        const auto with_cl = coexistence_run(p, chan, rx, cl, mode);
        const auto without = simulate_sdm(p, chan, rx, mode);
        for (int core = 0; core < 3; ++core) {
            const double q_with = with_cl[core].block.stats.qber_z();
            const double q_without = without[core].stats.qber_z();
            CHECK(q_with >= q_without);
            // Well under a quarter of a percentage point at -34 dBm / 80 dB.
            CHECK(q_with - q_without < 0.0025);
            CHECK(with_cl[core].classical_ber <= 1e-9);
            CHECK(with_cl[core].key.secret_bits >= 0.0);
        }
    }
}
