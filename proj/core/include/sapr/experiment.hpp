#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sapr/attack.hpp"
#include "sapr/dataset.hpp"
#include "sapr/eval.hpp"
#include "sapr/train.hpp"
#include "sapr/transfer.hpp"
#include "sapr/vit.hpp"

namespace sapr {

/// Experiment definition parsed from a strict JSON document: unknown keys are
/// rejected, every omitted key takes the documented default, and the document
/// is echoed verbatim into every artifact the run writes.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs/out";
    std::size_t workers = 0;

    struct DatasetSection {
        std::string kind = "synthetic"; // "synthetic" | "idx"
        std::size_t num_classes = 8;
        std::size_t per_class_train = 128;
        std::size_t per_class_test = 32;
        std::size_t image_size = 32;
        std::size_t channels = 3;
        std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;
    } dataset;

    ViTConfig vit; // image_size/channels/num_classes mirror the dataset section

    struct TargetSpec {
        std::string name;
        std::string kind; // "cnn" | "mlp"
        CnnConfig cnn;
        MlpConfig mlp;
    };
    std::vector<TargetSpec> targets;

    TrainOptions train;

    struct AttackSection {
        std::vector<AttackMethod> methods{AttackMethod::mim};
        bool run_plain = true;
        bool run_sapr = true;
        std::size_t num_images = 200;
        AttackConfig base;
        bool export_images = true;
    } attack;

    struct SweepSection {
        AttackMethod method = AttackMethod::mim;
        std::vector<double> grid; // default 0,0.05,...,0.9
        std::size_t num_images = 64;
    } sweep;

    std::vector<std::string> eval_targets; // default: every configured target

    std::string echo_json; // the parsed document, re-serialized

    static ExperimentConfig load_file(const std::filesystem::path& path);
    static ExperimentConfig from_json_text(const std::string& text);
};

/// Generates the configured train/test datasets (seeded from the global seed).
Dataset experiment_train_split(const ExperimentConfig& cfg);
Dataset experiment_test_split(const ExperimentConfig& cfg);

/// cmd_train: trains the ViT and every target, writing checkpoints and
/// loss-curve CSVs under output_dir.
void run_training(const ExperimentConfig& cfg, std::ostream& log);

/// cmd_attack: loads checkpoints, attacks the clean-correct test images with
/// every configured method/variant, quantizes to the pixel grid, evaluates
/// against the targets and writes report.json/report.txt, a manifest and
/// (optionally) PPM/PGM image files. With check_budget set, every iteration
/// asserts the L∞/pixel-range invariants.
void run_attack_experiment(const ExperimentConfig& cfg, std::ostream& log,
                           bool check_budget = false);

/// cmd_sweep: attack + evaluation per threshold grid point; writes sweep.csv.
void run_sweep_experiment(const ExperimentConfig& cfg, std::ostream& log);

/// cmd_eval: re-evaluates the adversarial images recorded in an attack run's
/// manifest against freshly loaded checkpoints; writes eval_report.json/.txt.
void run_eval_experiment(const ExperimentConfig& cfg, std::ostream& log);

} // namespace sapr
