#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sapr/attack.hpp"
#include "sapr/metrics.hpp"
#include "sapr/transfer.hpp"

namespace sapr {

struct EvalTarget {
    std::string name;
    TransferModel model;
};

struct TargetOutcome {
    std::string name;
    std::size_t eligible = 0;
    std::size_t hits = 0;
    /// 100·hits/eligible; absent when no example was eligible.
    std::optional<double> rate_percent;

    bool operator==(const TargetOutcome&) const = default;
};

struct ImageRecord {
    std::size_t index = 0;
    std::size_t label = 0;
    bool white_box_eligible = false;
    bool white_box_hit = false;
    /// Aligned with the report's target list: -1 ineligible, 0 miss, 1 hit.
    std::vector<int> target_hits;
    double ms_ssim = 0.0;

    bool operator==(const ImageRecord&) const = default;
};

/// Evaluation of one attack run against the white box and a target set.
/// An example counts toward a target only if the target classifies its clean
/// image correctly; a hit is any eligible example the target then
/// misclassifies.
struct AttackReport {
    std::string label;
    std::size_t image_count = 0;
    std::size_t white_box_eligible = 0;
    std::size_t white_box_hits = 0;
    std::optional<double> white_box_rate_percent;
    std::vector<TargetOutcome> targets;
    /// Arithmetic mean of the defined per-target rates.
    std::optional<double> average_transfer_percent;
    double mean_ms_ssim = 0.0;
    std::vector<ImageRecord> per_image;

    bool operator==(const AttackReport&) const = default;
};

AttackReport transfer_success_rate(std::span<const AdversarialExample> examples,
                                   std::span<const EvalTarget> targets, std::size_t workers = 0);

struct SweepRecord {
    double threshold = 0.0;
    GateMode gate_mode = GateMode::uniform;
    std::optional<double> average_rate_percent;
    std::vector<TargetOutcome> targets;
};

/// Runs the full attack + evaluation once per threshold in the grid
/// (ascending), holding everything else in `base` fixed. Gates are enabled
/// for every cell; the P=0 cell therefore reproduces the no-restructuring
/// baseline exactly.
std::vector<SweepRecord> p_sweep(std::span<const double> grid, const AttackConfig& base,
                                 const ViTModel& model, std::span<const EvalTarget> targets,
                                 std::span<const Tensor> images,
                                 std::span<const std::size_t> labels, std::size_t workers = 0);

/// Serialized report document (schema_version 1): seed, config echo, one run
/// object per report. Stable field order, no timestamps — byte-identical for
/// identical inputs.
std::string reports_to_json(std::span<const AttackReport> reports,
                            const std::string& config_echo_json, std::uint64_t seed);

struct ParsedReports {
    std::string config_echo_json;
    std::uint64_t seed = 0;
    std::vector<AttackReport> runs;
};

ParsedReports reports_from_json(const std::string& text);

/// Aligned-column table: one row per run, one column per target plus the
/// average.
std::string format_report_table(std::span<const AttackReport> reports);

/// Writes report.json and report.txt into the directory.
void emit_report(std::span<const AttackReport> reports, const std::string& config_echo_json,
                 std::uint64_t seed, const std::filesystem::path& directory);

std::string sweep_to_csv(std::span<const SweepRecord> records);

} // namespace sapr
