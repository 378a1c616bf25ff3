#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "sdmqkd/model.hpp"

using Catch::Approx;
using namespace sdmqkd;

TEST_CASE("default specs pass validation", "[model]") {
    CHECK(validation_errors(ProtocolParams{}).empty());
    CHECK(validation_errors(ChannelSpec{}).empty());
    CHECK(validation_errors(ReceiverSpec{}).empty());
    CHECK(validation_errors(ClassicalChannelSpec{}).empty());
    CHECK(validation_errors(AcquisitionSpec{}).empty());
    CHECK_NOTHROW(validate(ProtocolParams{}));
}

TEST_CASE("per-core excess loss table", "[model]") {
    const auto ex = ChannelSpec::default_excess(37, 0.5, kDefaultExcessSeed);
    REQUIRE(ex.size() == 37);
    for (double v : ex) {
        CHECK(v >= 0.0);
        CHECK(v < 0.5);
    }
    // The draw is pure mt19937_64 arithmetic, so it is reproducible to the
    // bit on any conforming platform. First five entries pinned here.
    CHECK(ex[0] == 0.4952326590016675);
    CHECK(ex[1] == 0.36071510879741525);
    CHECK(ex[2] == 0.22871581736488567);
    CHECK(ex[3] == 0.47040362117517664);
    CHECK(ex[4] == 0.2093778682616651);

    // Same seed, same table.
    CHECK(ChannelSpec::default_excess(37, 0.5, kDefaultExcessSeed) == ex);
    CHECK(ChannelSpec::default_excess(37, 0.5, 1234) != ex);
}

TEST_CASE("uniform crosstalk matrix", "[model]") {
    const auto m = ChannelSpec::uniform_crosstalk(5, 60.0);
    REQUIRE(m.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        REQUIRE(m[i].size() == 5);
        for (std::size_t j = 0; j < 5; ++j) {
            if (i == j)
                CHECK(std::isinf(m[i][j]));
            else
                CHECK(m[i][j] == 60.0);
        }
    }
}

TEST_CASE("effective core loss", "[model]") {
    ChannelSpec chan;  // 7.9 km * 0.27 dB/km + 1.6 dB fan-in/out + spread
    ReceiverSpec rx;
    CHECK(effective_core_loss(chan, 0, rx) == Approx(4.228232659001668).epsilon(1e-14));

    chan.extra_attenuation_db = 10.0;
    rx.wdm_insertion_db = 3.0;
    CHECK(effective_core_loss(chan, 0, rx) == Approx(17.228232659001668).epsilon(1e-14));

    CHECK_THROWS_AS(effective_core_loss(chan, -1, rx), std::out_of_range);
    CHECK_THROWS_AS(effective_core_loss(chan, 37, rx), std::out_of_range);
}

TEST_CASE("channel validation catches structural problems", "[model]") {
    ChannelSpec chan;
    chan.n_cores = 3;  // companions still sized for 37
    auto errs = validation_errors(chan);
    REQUIRE_FALSE(errs.empty());

    chan.per_core_excess_db = {0.1, 0.2, 0.3};
    chan.crosstalk_db = ChannelSpec::uniform_crosstalk(3, 60.0);
    CHECK(validation_errors(chan).empty());

    SECTION("isolation floor") {
        chan.crosstalk_db[0][1] = 30.0;  // below the 40 dB minimum
        errs = validation_errors(chan);
        REQUIRE(errs.size() == 1);
        CHECK(errs[0].find("isolation floor") != std::string::npos);
    }
    SECTION("diagonal is exempt") {
        chan.crosstalk_db[1][1] = 0.0;  // sentinel slot, ignored by the model
        CHECK(validation_errors(chan).empty());
    }
    SECTION("negative excess") {
        chan.per_core_excess_db[2] = -0.01;
        errs = validation_errors(chan);
        REQUIRE(errs.size() == 1);
        CHECK(errs[0].find("per_core_excess_db[2]") != std::string::npos);
    }
}

TEST_CASE("protocol validation", "[model]") {
    ProtocolParams p;
    p.mu2 = 0.2;  // above mu1: decoy bounds would divide by a negative gap
    auto errs = validation_errors(p);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("strictly below mu1") != std::string::npos);

    p.mu2 = 0.07;
    p.f_ec = 0.99;
    errs = validation_errors(p);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("f_ec") != std::string::npos);
}

TEST_CASE("receiver validation", "[model]") {
    ReceiverSpec rx;
    rx.n_z_detectors = 5;  // the splitter has four output ports
    CHECK_FALSE(validation_errors(rx).empty());
    rx.n_z_detectors = 1;
    CHECK(validation_errors(rx).empty());

    rx.calibration_scale = 1.2;  // calibration only ever removes light
    CHECK_FALSE(validation_errors(rx).empty());
}

TEST_CASE("validate() aggregates every problem into one message", "[model]") {
    ProtocolParams p;
    p.mu1 = 0.0;
    p.p_z_alice = 1.5;
    try {
        validate(p);
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        // mu1 out of range also breaks the mu2 < mu1 ordering: three problems.
        CHECK(msg.find("invalid configuration (3 problems):") != std::string::npos);
        CHECK(msg.find("protocol.mu1") != std::string::npos);
        CHECK(msg.find("protocol.p_z_alice") != std::string::npos);
    }
}

TEST_CASE("block statistics helpers", "[model]") {
    BlockStats s;
    s.n_z_mu1 = 700;
    s.m_z_mu1 = 7;
    s.n_z_mu2 = 300;
    s.m_z_mu2 = 5;
    s.n_x_mu1 = 60;
    s.m_x_mu1 = 3;
    s.n_x_mu2 = 40;
    s.m_x_mu2 = 1;
    s.t_acq_s = 2.0;

    CHECK(s.n_z() == 1000);
    CHECK(s.m_z() == 12);
    CHECK(s.n_x() == 100);
    CHECK(s.m_x() == 4);
    CHECK(s.qber_z() == Approx(0.012));
    CHECK(s.qber_x() == Approx(0.04));
    CHECK(validation_errors(s).empty());

    SECTION("empty block has zero error rates, not NaN") {
        BlockStats empty;
        CHECK(empty.qber_z() == 0.0);
        CHECK(empty.qber_x() == 0.0);
    }
    SECTION("errors cannot exceed detections") {
        s.m_z_mu2 = 301;
        const auto errs = validation_errors(s);
        REQUIRE(errs.size() == 1);
        CHECK(errs[0].find("m_z_mu2") != std::string::npos);
    }
    SECTION("acquisition time must be set") {
        s.t_acq_s = 0.0;
        CHECK_FALSE(validation_errors(s).empty());
    }
}
