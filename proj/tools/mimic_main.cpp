#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <omp.h>

#include "mimic/abm/config.hpp"
#include "mimic/abm/sim.hpp"
#include "mimic/cli/selftest.hpp"
#include "mimic/codec/dataset.hpp"
#include "mimic/codec/vocab.hpp"
#include "mimic/util/hash.hpp"

namespace {

void apply_thread_env() {
    if (const char* env = std::getenv("MIMIC_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
}

int cmd_simulate(const std::string& config_path, int days, int64_t seed,
                 const std::string& out_dir) {
    mimic::abm::SimConfig cfg = config_path.empty()
                                    ? mimic::abm::SimConfig::defaults()
                                    : mimic::abm::SimConfig::from_file(config_path);
    if (days > 0) cfg.days = days;
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    cfg.validate();
    mimic::abm::SimResult res = mimic::abm::run_simulation(cfg, out_dir);
    int64_t total = 0;
    for (const auto& d : res.days) {
        std::cout << "day " << d.day << ": " << d.messages << " messages ("
                  << d.by_type[0] << " limit, " << d.by_type[1] << " market, "
                  << d.by_type[2] << " cancel), final mid2 " << d.final_mid2 << '\n';
        total += d.messages;
    }
    std::cout << "wrote " << res.days.size() << " day(s), " << total
              << " messages to " << out_dir << '\n';
    return 0;
}

int cmd_encode(const std::string& data_dir, const std::string& out_dir) {
    mimic::codec::EncodeStats stats = mimic::codec::encode_dataset(data_dir, out_dir);
    double frac = stats.messages
                      ? static_cast<double>(stats.clips.messages) /
                            static_cast<double>(stats.messages)
                      : 0.0;
    std::cout << "encoded " << stats.messages << " messages to " << out_dir << '\n';
    std::cout << "clipped fields: price " << stats.clips.price << ", size "
              << stats.clips.size << ", ref_price " << stats.clips.ref_price
              << ", ref_size " << stats.clips.ref_size << ", dt " << stats.clips.dt
              << " (message fraction " << frac << ")\n";
    return 0;
}

int cmd_vocab(const std::string& out_path) {
    std::string table = mimic::codec::vocab::table_csv();
    std::string line = "# hash " + mimic::util::hex64(mimic::codec::vocab::table_hash()) + "\n";
    if (out_path.empty()) {
        std::cout << line << table;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "cannot open " << out_path << '\n';
            return 1;
        }
        out << line << table;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    apply_thread_env();

    CLI::App app{"Order-flow simulator and masked-token sequence model"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run the agent-based market simulation");
    std::string sim_config;
    int sim_days = -1;
    int64_t sim_seed = -1;
    std::string sim_out = "out/sim";
    sim->add_option("--config", sim_config, "Simulation config JSON (defaults built in)");
    sim->add_option("--days", sim_days, "Override configured day count");
    sim->add_option("--seed", sim_seed, "Override configured seed");
    sim->add_option("--out", sim_out, "Output directory");

    // encode
    auto* enc = app.add_subcommand("encode", "Tokenize a simulation run for training");
    std::string enc_data, enc_out = "out/dataset";
    enc->add_option("--data", enc_data, "Simulation output directory")->required();
    enc->add_option("--out", enc_out, "Dataset output directory");

    // train
    auto* tr = app.add_subcommand("train", "Train the sequence model on a dataset");
    std::string tr_data, tr_out = "out/train";
    int tr_group = 14;
    int tr_epochs = 10;
    std::string tr_preset = "desk";
    int64_t tr_seed = 1;
    tr->add_option("--data", tr_data, "Encoded dataset directory")->required();
    tr->add_option("--out", tr_out, "Run output directory");
    tr->add_option("--target-group", tr_group, "Agent group to model");
    tr->add_option("--epochs", tr_epochs, "Training epochs");
    tr->add_option("--preset", tr_preset, "Model size preset (desk|paper)");
    tr->add_option("--seed", tr_seed, "Training seed");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint against held-out days");
    std::string ev_model, ev_data, ev_out = "out/eval";
    ev->add_option("--model", ev_model, "Checkpoint file")->required();
    ev->add_option("--data", ev_data, "Encoded dataset directory")->required();
    ev->add_option("--out", ev_out, "Evaluation output directory");

    // report
    auto* rep = app.add_subcommand("report", "Summarize an evaluation run");
    std::string rep_run, rep_format = "csv";
    rep->add_option("--run", rep_run, "Evaluation output directory")->required();
    rep->add_option("--format", rep_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    // vocab
    auto* voc = app.add_subcommand("vocab", "Dump the token vocabulary table");
    std::string voc_out;
    voc->add_option("--out", voc_out, "Write to a file instead of stdout");

    // selftest
    app.add_subcommand("selftest", "Run quick internal consistency checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << '\n';
        return 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_config, sim_days, sim_seed, sim_out);
        if (enc->parsed()) return cmd_encode(enc_data, enc_out);
        if (tr->parsed()) {
            std::cerr << "train: not implemented yet\n";
            return 1;
        }
        if (ev->parsed()) {
            std::cerr << "evaluate: not implemented yet\n";
            return 1;
        }
        if (rep->parsed()) {
            std::cerr << "report: not implemented yet\n";
            return 1;
        }
        if (voc->parsed()) return cmd_vocab(voc_out);
        return mimic::cli::run_selftest(std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
