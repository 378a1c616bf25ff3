// Command-line front end: simulate, sweep-loss, compare-encodings, coexist,
// finitekey. Every run drops its outputs plus a manifest.json into the chosen
// output directory. Exit codes: 0 success, 1 bad input or configuration,
// 2 physically infeasible request.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdmqkd/capacity.hpp"
#include "sdmqkd/coexistence.hpp"
#include "sdmqkd/config.hpp"
#include "sdmqkd/finitekey.hpp"
#include "sdmqkd/model.hpp"
#include "sdmqkd/sdm.hpp"
#include "sdmqkd/simulator.hpp"
#include "sdmqkd/stats_io.hpp"

namespace {

using namespace sdmqkd;

std::string g_config_path;
std::string g_out_dir = "out";
int g_threads = 1;

std::string out_path(const std::string& name) {
    return (std::filesystem::path(g_out_dir) / name).string();
}

RunManifest start_manifest(const std::string& command, int argc, char** argv) {
    RunManifest m;
    m.command = command;
    for (int i = 0; i < argc; ++i) m.argv.emplace_back(argv[i]);
    m.started_utc = utc_timestamp();
    return m;
}

void finish_manifest(RunManifest& m) {
    m.finished_utc = utc_timestamp();
    const std::string path = out_path("manifest.json");
    save_manifest(m, path);
    std::cout << "wrote " << path << "\n";
}

// Applies the configured calibration target, if any, and reports the scale.
SystemConfig load_effective_config() {
    SystemConfig cfg = load_config(g_config_path);
    if (cfg.calibration.target_z_detections_per_s > 0.0) {
        const auto cal = calibrate_to_target(cfg.calibration.target_z_detections_per_s,
                                             cfg.protocol, cfg.channel, cfg.receiver);
        cfg.receiver = cal.receiver;
        std::cout << "calibration scale " << cal.scale << " hits "
                  << cfg.calibration.target_z_detections_per_s
                  << " key-basis detections/s per core\n";
    }
    return cfg;
}

double aggregate_expected_nz(const ProtocolParams& p, const ChannelSpec& chan,
                             const ReceiverSpec& rx, const std::vector<double>& backgrounds) {
    double agg = 0.0;
    for (int core = 0; core < chan.n_cores; ++core) {
        const double bg = backgrounds.empty() ? crosstalk_background_rate(p, chan, core, rx)
                                              : backgrounds[static_cast<std::size_t>(core)];
        agg += expected_rates(p, chan, core, rx, bg).n_z_rate;
    }
    return agg;
}

void warn_saturation(const std::vector<TaggedBlockStats>& blocks) {
    for (const auto& b : blocks)
        if (b.saturation_warning) {
            std::cerr << "warning: detector hold-off dominates the candidate rate "
                         "(core " << b.core_id << " and possibly others); "
                         "counts saturate well below the linear estimate\n";
            return;
        }
}

std::string fmt(double v, int precision = 10) { return detail::fmt_g(v, precision); }

// ---- simulate -----------------------------------------------------------------

struct SimulateArgs {
    std::string mode = "analytic";
    std::uint64_t seed = 1;
    bool seed_given = false;
    double pulses = 1e7;
    bool emit_keys = false;
};

int cmd_simulate(const SimulateArgs& a, int argc, char** argv) {
    SystemConfig cfg = load_effective_config();
    RunManifest man = start_manifest("simulate", argc, argv);
    man.config_digest_hex = digest_hex(config_digest(cfg));
    man.calibration_scale = cfg.receiver.calibration_scale;
    man.mode = a.mode;

    SimulationMode mode;
    if (a.mode == "analytic") {
        if (a.seed_given)
            std::cerr << "warning: --seed has no effect in analytic mode and is ignored\n";
        const double agg = aggregate_expected_nz(cfg.protocol, cfg.channel, cfg.receiver, {});
        mode = SimulationMode::analytic(cfg.acquisition.block_bits / agg);
        man.master_seed = 0;
    } else {
        mode = SimulationMode::monte_carlo(a.seed, static_cast<std::uint64_t>(a.pulses));
        man.master_seed = a.seed;
    }

    const auto blocks =
        simulate_sdm(cfg.protocol, cfg.channel, cfg.receiver, mode, {}, g_threads);
    warn_saturation(blocks);

    std::vector<CoreBlockRecord> records;
    double aggregate = 0.0;
    std::ofstream res(out_path("simulate.csv"));
    if (!res) throw ConfigError("cannot write " + out_path("simulate.csv"));
    res << "# per-core block analysis\n"
        << "# n_z [counts], qber_z [fraction], phi_z_upper [fraction], "
           "secret_bits [bits], skr_bps [bit/s]\n"
        << "core_id,n_z,qber_z,phi_z_upper,secret_bits,skr_bps\n";

    std::vector<CoreKey> keys;
    for (const auto& b : blocks) {
        records.push_back({b.core_id, b.stats});
        const FiniteKeyResult fk = analyze_block(b.stats, cfg.protocol);
        aggregate += fk.rate_bps;
        res << b.core_id << ',' << b.stats.n_z() << ',' << fmt(b.stats.qber_z(), 6) << ','
            << fmt(fk.phi_z_upper, 6) << ',' << fmt(fk.secret_bits, 17) << ','
            << fmt(fk.rate_bps, 10) << '\n';
        if (a.emit_keys) keys.push_back(extract_core_key(b, fk, a.seed, b.core_id));
    }
    res << "# aggregate_skr_bps=" << fmt(aggregate, 10) << '\n';
    res.close();
    man.outputs.push_back("simulate.csv");

    write_stats_csv(out_path("stats.csv"), records);
    man.outputs.push_back("stats.csv");

    if (a.emit_keys) {
        write_key_file(out_path("keys.bin"), keys);
        write_multiplexed_key(out_path("keys_mux.bin"), multiplex(keys));
        man.outputs.insert(man.outputs.end(), {"keys.bin", "keys_mux.bin", "keys_mux.bin.manifest"});
        std::cout << "note: emitted key bits are PRNG placeholder material sized by the\n"
                     "analysis; they are NOT secure keys and must never be used as such\n";
    }

    std::cout << "aggregate secret key rate " << fmt(aggregate, 10) << " bit/s over "
              << cfg.channel.n_cores << " cores\n";
    finish_manifest(man);
    return 0;
}

// ---- sweep-loss ---------------------------------------------------------------

struct SweepArgs {
    double from_db = 4.0;
    double to_db = 52.0;
    int steps = 30;
    double block_bits = 0.0;       // 0: take the acquisition default
    double tail_block_bits = 1e9;  // smaller blocks once the rate collapses
    double tail_from_db = 40.0;
};

int cmd_sweep(const SweepArgs& a, int argc, char** argv) {
    if (a.steps < 2) throw ConfigError("sweep-loss: --steps must be >= 2");
    if (a.to_db <= a.from_db) throw ConfigError("sweep-loss: --to-db must exceed --from-db");
    SystemConfig cfg = load_effective_config();
    RunManifest man = start_manifest("sweep-loss", argc, argv);
    man.config_digest_hex = digest_hex(config_digest(cfg));
    man.calibration_scale = cfg.receiver.calibration_scale;
    man.mode = "analytic";

    const double head_block = a.block_bits > 0.0 ? a.block_bits : cfg.acquisition.block_bits;
    std::vector<SweepPoint> points;
    for (int i = 0; i < a.steps; ++i) {
        SweepPoint pt;
        pt.loss_db = a.from_db + (a.to_db - a.from_db) * i / (a.steps - 1);
        pt.block_bits = pt.loss_db >= a.tail_from_db ? a.tail_block_bits : head_block;
        points.push_back(pt);
    }

    const auto curve =
        rate_vs_loss_curve(cfg.protocol, cfg.channel, cfg.receiver, points, g_threads);

    std::ofstream res(out_path("sweep.csv"));
    if (!res) throw ConfigError("cannot write " + out_path("sweep.csv"));
    res << "# secret key rate versus total channel loss (analytic model)\n"
        << "# loss_db [dB], block_bits [detections], t_acq_s [s], "
           "aggregate_skr_bps [bit/s], per_core_mean_bps [bit/s]\n"
        << "loss_db,block_bits,t_acq_s,aggregate_skr_bps,per_core_mean_bps\n";
    for (const auto& r : curve)
        res << fmt(r.loss_db, 10) << ',' << fmt(r.block_bits, 10) << ',' << fmt(r.t_acq_s, 10)
            << ',' << fmt(r.aggregate_skr_bps, 10) << ',' << fmt(r.per_core_mean_bps, 10) << '\n';
    res.close();
    man.outputs.push_back("sweep.csv");

    // Report where the curve dies, if it does inside the grid.
    double last_live = -1.0, first_dead = -1.0;
    for (const auto& r : curve) {
        if (r.aggregate_skr_bps > 0.0)
            last_live = r.loss_db;
        else if (first_dead < 0.0 && last_live >= 0.0)
            first_dead = r.loss_db;
    }
    if (first_dead > 0.0)
        std::cout << "rate floor: last positive point " << last_live << " dB, first zero "
                  << first_dead << " dB\n";
    finish_manifest(man);
    return 0;
}

// ---- compare-encodings ----------------------------------------------------------

struct CompareArgs {
    int max_modes = 32;
    double q_max = 0.12;
    int q_steps = 60;
};

int cmd_compare(const CompareArgs& a, int argc, char** argv) {
    if (a.max_modes < 2) throw ConfigError("compare-encodings: --max-modes must be >= 2");
    if (!(a.q_max > 0.0 && a.q_max < 0.5))
        throw ConfigError("compare-encodings: --q-max must be in (0, 0.5)");
    if (a.q_steps < 1) throw ConfigError("compare-encodings: --q-steps must be >= 1");
    SystemConfig cfg = load_effective_config();
    RunManifest man = start_manifest("compare-encodings", argc, argv);
    man.config_digest_hex = digest_hex(config_digest(cfg));
    man.calibration_scale = cfg.receiver.calibration_scale;
    man.mode = "analytic";

    EncodingParams ep;
    ep.channel_loss_db =
        cfg.channel.length_km * cfg.channel.atten_db_per_km + cfg.channel.fan_io_db;
    ep.eta_bob = cfg.receiver.eta_bob;
    ep.eta_det = cfg.receiver.eta_det;
    ep.mu = cfg.protocol.mu1;
    ep.f_ec = cfg.protocol.f_ec;
    const double eta_channel = db_to_linear(ep.channel_loss_db);

    std::vector<int> modes;
    for (int n = 2; n <= a.max_modes; n *= 2) modes.push_back(n);

    std::ofstream res(out_path("compare.csv"));
    if (!res) throw ConfigError("cannot write " + out_path("compare.csv"));
    res << "# parallel qubit channels versus one high-dimensional channel over the "
           "same modes\n"
        << "# q [fraction], rates [secret bits per clock cycle], plob "
           "[bits per channel use]\n"
        << "q,n_modes,parallel_rate,hid_rate,plob_bound\n";
    for (int i = 0; i <= a.q_steps; ++i) {
        const double q = a.q_max * i / a.q_steps;
        for (int n : modes)
            res << fmt(q, 10) << ',' << n << ',' << fmt(parallel_rate(ep, n, q), 10) << ','
                << fmt(hid_rate(ep, n, q), 10) << ',' << fmt(plob_mcf(n, eta_channel), 10)
                << '\n';
    }
    for (int n : modes) {
        const double qx = crossover_error_rate(ep, n);
        res << "# crossover_q(n_modes=" << n << ")="
            << (qx < 0.0 ? "none" : fmt(qx, 10)) << '\n';
        std::cout << "n_modes " << n << ": high-dimensional overtakes parallel at q "
                  << (qx < 0.0 ? "none" : fmt(qx, 6)) << '\n';
    }
    res.close();
    man.outputs.push_back("compare.csv");
    finish_manifest(man);
    return 0;
}

// ---- coexist --------------------------------------------------------------------

struct CoexistArgs {
    double rx_dbm = 0.0;
    bool rx_given = false;
    double ext_db = 0.0;
    bool ext_given = false;
    double wdm_db = 3.0;
    std::string mode = "analytic";
    std::uint64_t seed = 1;
    double pulses = 1e7;
};

int cmd_coexist(const CoexistArgs& a, int argc, char** argv) {
    SystemConfig cfg = load_effective_config();
    if (a.rx_given) cfg.classical.rx_power_dbm = a.rx_dbm;
    if (a.ext_given) cfg.classical.wdm_extinction_db = a.ext_db;
    cfg.receiver.wdm_insertion_db = a.wdm_db;
    validate(cfg.receiver);

    RunManifest man = start_manifest("coexist", argc, argv);
    man.config_digest_hex = digest_hex(config_digest(cfg));
    man.calibration_scale = cfg.receiver.calibration_scale;
    man.mode = a.mode;

    const auto bg =
        coexistence_backgrounds(cfg.protocol, cfg.channel, cfg.receiver, cfg.classical);
    SimulationMode mode;
    if (a.mode == "analytic") {
        const double agg = aggregate_expected_nz(cfg.protocol, cfg.channel, cfg.receiver, bg);
        mode = SimulationMode::analytic(cfg.acquisition.block_bits / agg);
        man.master_seed = 0;
    } else {
        mode = SimulationMode::monte_carlo(a.seed, static_cast<std::uint64_t>(a.pulses));
        man.master_seed = a.seed;
    }

    const auto results = coexistence_run(cfg.protocol, cfg.channel, cfg.receiver, cfg.classical,
                                         mode, g_threads);
    {
        std::vector<TaggedBlockStats> blocks;
        for (const auto& r : results) blocks.push_back(r.block);
        warn_saturation(blocks);
    }

    double aggregate = 0.0;
    std::ofstream res(out_path("coexist.csv"));
    if (!res) throw ConfigError("cannot write " + out_path("coexist.csv"));
    res << "# quantum cores under a co-propagating classical channel at "
        << fmt(cfg.classical.rx_power_dbm, 6) << " dBm received\n"
        << "# skr_bps [bit/s], qber_z [fraction], phi_z_upper [fraction], "
           "classical_ber [probability]\n"
        << "core_id,skr_bps,qber_z,phi_z_upper,classical_ber\n";
    for (const auto& r : results) {
        aggregate += r.key.rate_bps;
        res << r.block.core_id << ',' << fmt(r.key.rate_bps, 10) << ','
            << fmt(r.block.stats.qber_z(), 6) << ',' << fmt(r.key.phi_z_upper, 6) << ','
            << fmt(r.classical_ber, 10) << '\n';
    }
    res << "# aggregate_skr_bps=" << fmt(aggregate, 10) << '\n';
    res.close();
    man.outputs.push_back("coexist.csv");

    std::cout << "aggregate secret key rate " << fmt(aggregate, 10)
              << " bit/s with classical BER " << fmt(results.empty() ? 0.5 : results[0].classical_ber, 10)
              << " per core\n";
    finish_manifest(man);
    return 0;
}

// ---- finitekey ------------------------------------------------------------------

int cmd_finitekey(const std::string& stats_file, int argc, char** argv) {
    SystemConfig cfg = load_config(g_config_path);  // no calibration: counts are given
    const auto records = read_stats_csv(stats_file);
    if (records.empty()) throw ConfigError("stats file has no data rows: " + stats_file);

    RunManifest man = start_manifest("finitekey", argc, argv);
    man.config_digest_hex = digest_hex(config_digest(cfg));
    man.calibration_scale = cfg.receiver.calibration_scale;
    man.mode = "replay";

    double aggregate = 0.0;
    std::ofstream res(out_path("finitekey.csv"));
    if (!res) throw ConfigError("cannot write " + out_path("finitekey.csv"));
    res << "# finite-key analysis replayed from " << stats_file << "\n"
        << "# counts [events], lambda_ec/secret_bits [bits], skr_bps [bit/s]\n"
        << "core_id,n_z,qber_z,s_z0_lower,s_z1_lower,phi_z_upper,lambda_ec,"
           "secret_bits,skr_bps\n";
    for (const auto& rec : records) {
        const FiniteKeyResult fk = analyze_block(rec.stats, cfg.protocol);
        aggregate += fk.rate_bps;
        res << rec.core_id << ',' << rec.stats.n_z() << ',' << fmt(fk.qber_z, 6) << ','
            << fmt(fk.s_z0_lower, 10) << ',' << fmt(fk.s_z1_lower, 10) << ','
            << fmt(fk.phi_z_upper, 6) << ',' << fmt(fk.lambda_ec, 10) << ','
            << fmt(fk.secret_bits, 17) << ',' << fmt(fk.rate_bps, 10) << '\n';
    }
    res << "# aggregate_skr_bps=" << fmt(aggregate, 10) << '\n';
    res.close();
    man.outputs.push_back("finitekey.csv");
    std::cout << "aggregate secret key rate " << fmt(aggregate, 10) << " bit/s over "
              << records.size() << " records\n";
    finish_manifest(man);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator and analysis engine for multicore-fibre QKD"};
    app.require_subcommand(1);
    app.add_option("--config", g_config_path, "system configuration JSON")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--out", g_out_dir, "output directory (created if missing)")
        ->envname("SDMQKD_OUT_DIR");
    app.add_option("--threads", g_threads, "worker threads for per-core work")
        ->check(CLI::Range(1, 256));

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "one acquisition block on every core");
    c_sim->fallthrough();
    c_sim->add_option("--mode", sim.mode, "analytic or monte-carlo")
        ->check(CLI::IsMember({"analytic", "monte-carlo"}));
    auto* seed_opt = c_sim->add_option("--seed", sim.seed, "master seed (monte-carlo)");
    c_sim->add_option("--pulses", sim.pulses, "pulses per core (monte-carlo)")
        ->check(CLI::PositiveNumber);
    c_sim->add_flag("--emit-keys", sim.emit_keys, "write placeholder key material");

    SweepArgs sw;
    auto* c_sw = app.add_subcommand("sweep-loss", "secret key rate versus channel loss");
    c_sw->fallthrough();
    c_sw->add_option("--from-db", sw.from_db, "first grid point, dB");
    c_sw->add_option("--to-db", sw.to_db, "last grid point, dB");
    c_sw->add_option("--steps", sw.steps, "number of grid points");
    c_sw->add_option("--block-bits", sw.block_bits, "block size for the head of the curve");
    c_sw->add_option("--tail-block-bits", sw.tail_block_bits, "block size beyond --tail-from-db");
    c_sw->add_option("--tail-from-db", sw.tail_from_db, "loss where the tail block takes over");

    CompareArgs cmp;
    auto* c_cmp = app.add_subcommand("compare-encodings",
                                     "parallel qubit versus high-dimensional encoding");
    c_cmp->fallthrough();
    c_cmp->add_option("--max-modes", cmp.max_modes, "largest mode count (powers of two up to this)");
    c_cmp->add_option("--q-max", cmp.q_max, "largest error rate on the grid");
    c_cmp->add_option("--q-steps", cmp.q_steps, "error-rate grid intervals");

    CoexistArgs cx;
    auto* c_cx = app.add_subcommand("coexist", "quantum cores with a classical channel alongside");
    c_cx->fallthrough();
    auto* rx_opt = c_cx->add_option("--rx-dbm", cx.rx_dbm, "received classical power per core, dBm");
    auto* ext_opt = c_cx->add_option("--extinction-db", cx.ext_db, "demux classical extinction, dB");
    c_cx->add_option("--wdm-db", cx.wdm_db, "demux insertion loss on the quantum path, dB");
    c_cx->add_option("--mode", cx.mode, "analytic or monte-carlo")
        ->check(CLI::IsMember({"analytic", "monte-carlo"}));
    c_cx->add_option("--seed", cx.seed, "master seed (monte-carlo)");
    c_cx->add_option("--pulses", cx.pulses, "pulses per core (monte-carlo)")
        ->check(CLI::PositiveNumber);

    std::string stats_file;
    auto* c_fk = app.add_subcommand("finitekey", "replay finite-key analysis from a stats CSV");
    c_fk->fallthrough();
    c_fk->add_option("--stats-file", stats_file, "counting statistics CSV")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        std::filesystem::create_directories(g_out_dir);
        sim.seed_given = seed_opt->count() > 0;
        cx.rx_given = rx_opt->count() > 0;
        cx.ext_given = ext_opt->count() > 0;
        if (c_sim->parsed()) return cmd_simulate(sim, argc, argv);
        if (c_sw->parsed()) return cmd_sweep(sw, argc, argv);
        if (c_cmp->parsed()) return cmd_compare(cmp, argc, argv);
        if (c_cx->parsed()) return cmd_coexist(cx, argc, argv);
        if (c_fk->parsed()) return cmd_finitekey(stats_file, argc, argv);
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
