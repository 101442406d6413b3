// sapr: train desk-scale models, run restructuring attacks against the ViT,
// sweep the gate threshold and evaluate transfer rates.
//
// Exit codes: 0 success, 1 usage, 2 configuration, 3 I/O, 4 numeric failure.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sapr/experiment.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string output_override;
    std::size_t workers = 0;
    bool workers_set = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("-c,--config", opts.config_path, "experiment config (JSON)")->required();
    cmd->add_option("-o,--out", opts.output_override, "override the config's output_dir");
    cmd->add_option("-w,--workers", opts.workers, "parallel attack/eval workers (default: cores)")
        ->each([&](const std::string&) { opts.workers_set = true; });
}

sapr::ExperimentConfig load_config(const CommonOptions& opts) {
    auto cfg = sapr::ExperimentConfig::load_file(opts.config_path);
    if (!opts.output_override.empty()) cfg.output_dir = opts.output_override;
    if (opts.workers_set) {
        cfg.workers = opts.workers;
        cfg.train.workers = opts.workers;
    }
    return cfg;
}

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const sapr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sapr::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const sapr::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const sapr::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SAPR: patch-restructuring transfer attacks on a desk-scale ViT"};
    app.require_subcommand(1);

    CommonOptions train_opts, attack_opts, sweep_opts, eval_opts;
    bool debug_budget = false;

    auto* train = app.add_subcommand("train", "train the white-box ViT and the transfer targets");
    add_common(train, train_opts);

    auto* attack = app.add_subcommand(
        "attack", "generate adversarial examples and evaluate transfer success rates");
    add_common(attack, attack_opts);
    attack->add_flag("--debug-budget", debug_budget,
                     "assert the L-inf budget and pixel range after every iteration");

    auto* sweep =
        app.add_subcommand("sweep", "run the attack across a grid of restructuring thresholds");
    add_common(sweep, sweep_opts);

    auto* eval = app.add_subcommand(
        "eval", "re-evaluate exported adversarial images against the checkpoints");
    add_common(eval, eval_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (train->parsed())
        return guarded([&] { sapr::run_training(load_config(train_opts), std::cout); });
    if (attack->parsed())
        return guarded(
            [&] { sapr::run_attack_experiment(load_config(attack_opts), std::cout, debug_budget); });
    if (sweep->parsed())
        return guarded([&] { sapr::run_sweep_experiment(load_config(sweep_opts), std::cout); });
    if (eval->parsed())
        return guarded([&] { sapr::run_eval_experiment(load_config(eval_opts), std::cout); });
    return 1;
}
