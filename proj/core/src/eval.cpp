#include "sapr/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sapr/parallel.hpp"

namespace sapr {

AttackReport transfer_success_rate(std::span<const AdversarialExample> examples,
                                   std::span<const EvalTarget> targets, std::size_t workers) {
    AttackReport report;
    report.image_count = examples.size();
    report.targets.resize(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) report.targets[t].name = targets[t].name;
    report.per_image.resize(examples.size());

    parallel_for(examples.size(), workers, [&](std::size_t i) {
        const AdversarialExample& ex = examples[i];
        ImageRecord rec;
        rec.index = i;
        rec.label = ex.label;
        rec.white_box_eligible = ex.clean_prediction == ex.label;
        rec.white_box_hit = rec.white_box_eligible && ex.adversarial_prediction != ex.label;
        rec.ms_ssim = ms_ssim(ex.original, ex.adversarial);
        rec.target_hits.resize(targets.size(), -1);
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const std::size_t clean = transfer_predict(ex.original, targets[t].model);
            if (clean != ex.label) continue; // ineligible for this target
            const std::size_t adv = transfer_predict(ex.adversarial, targets[t].model);
            rec.target_hits[t] = adv != ex.label ? 1 : 0;
        }
        report.per_image[i] = std::move(rec);
    });

    double ms_sum = 0.0;
    for (const ImageRecord& rec : report.per_image) {
        ms_sum += rec.ms_ssim;
        if (rec.white_box_eligible) {
            ++report.white_box_eligible;
            if (rec.white_box_hit) ++report.white_box_hits;
        }
        for (std::size_t t = 0; t < targets.size(); ++t) {
            if (rec.target_hits[t] < 0) continue;
            ++report.targets[t].eligible;
            if (rec.target_hits[t] == 1) ++report.targets[t].hits;
        }
    }
    if (report.white_box_eligible > 0)
        report.white_box_rate_percent = 100.0 * static_cast<double>(report.white_box_hits) /
                                        static_cast<double>(report.white_box_eligible);
    double rate_sum = 0.0;
    std::size_t rated = 0;
    for (TargetOutcome& t : report.targets) {
        if (t.eligible > 0) {
            t.rate_percent =
                100.0 * static_cast<double>(t.hits) / static_cast<double>(t.eligible);
            rate_sum += *t.rate_percent;
            ++rated;
        }
    }
    if (rated > 0) report.average_transfer_percent = rate_sum / static_cast<double>(rated);
    if (!report.per_image.empty())
        report.mean_ms_ssim = ms_sum / static_cast<double>(report.per_image.size());
    return report;
}

std::vector<SweepRecord> p_sweep(std::span<const double> grid, const AttackConfig& base,
                                 const ViTModel& model, std::span<const EvalTarget> targets,
                                 std::span<const Tensor> images,
                                 std::span<const std::size_t> labels, std::size_t workers) {
    if (grid.empty()) throw ConfigError("p_sweep: empty threshold grid");
    std::vector<double> thresholds(grid.begin(), grid.end());
    std::sort(thresholds.begin(), thresholds.end());

    std::vector<SweepRecord> records;
    records.reserve(thresholds.size());
    for (double p : thresholds) {
        AttackConfig cfg = base;
        cfg.sapr_enabled = true;
        cfg.restructure_threshold = p;
        auto examples = run_attack_batch(images, labels, model, cfg, workers);
        AttackReport report = transfer_success_rate(examples, targets, workers);
        SweepRecord rec;
        rec.threshold = p;
        rec.gate_mode = cfg.gate_mode;
        rec.average_rate_percent = report.average_transfer_percent;
        rec.targets = report.targets;
        records.push_back(std::move(rec));
    }
    return records;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json report_to_json(const AttackReport& r) {
    ordered_json j;
    j["label"] = r.label;
    j["image_count"] = r.image_count;
    j["white_box"] = {{"eligible", r.white_box_eligible},
                      {"hits", r.white_box_hits},
                      {"rate_percent", r.white_box_rate_percent
                                           ? ordered_json(*r.white_box_rate_percent)
                                           : ordered_json(nullptr)}};
    j["targets"] = ordered_json::array();
    for (const TargetOutcome& t : r.targets) {
        j["targets"].push_back(
            {{"name", t.name},
             {"eligible", t.eligible},
             {"hits", t.hits},
             {"rate_percent", t.rate_percent ? ordered_json(*t.rate_percent) : ordered_json(nullptr)}});
    }
    j["average_transfer_percent"] =
        r.average_transfer_percent ? ordered_json(*r.average_transfer_percent) : ordered_json(nullptr);
    j["mean_ms_ssim"] = r.mean_ms_ssim;
    j["per_image"] = ordered_json::array();
    for (const ImageRecord& rec : r.per_image) {
        j["per_image"].push_back({{"index", rec.index},
                                  {"label", rec.label},
                                  {"wb_eligible", rec.white_box_eligible},
                                  {"wb_hit", rec.white_box_hit},
                                  {"target_hits", rec.target_hits},
                                  {"ms_ssim", rec.ms_ssim}});
    }
    return j;
}

AttackReport report_from_json(const ordered_json& j) {
    AttackReport r;
    r.label = j.at("label").get<std::string>();
    r.image_count = j.at("image_count").get<std::size_t>();
    r.white_box_eligible = j.at("white_box").at("eligible").get<std::size_t>();
    r.white_box_hits = j.at("white_box").at("hits").get<std::size_t>();
    if (!j.at("white_box").at("rate_percent").is_null())
        r.white_box_rate_percent = j.at("white_box").at("rate_percent").get<double>();
    for (const auto& t : j.at("targets")) {
        TargetOutcome o;
        o.name = t.at("name").get<std::string>();
        o.eligible = t.at("eligible").get<std::size_t>();
        o.hits = t.at("hits").get<std::size_t>();
        if (!t.at("rate_percent").is_null()) o.rate_percent = t.at("rate_percent").get<double>();
        r.targets.push_back(std::move(o));
    }
    if (!j.at("average_transfer_percent").is_null())
        r.average_transfer_percent = j.at("average_transfer_percent").get<double>();
    r.mean_ms_ssim = j.at("mean_ms_ssim").get<double>();
    for (const auto& p : j.at("per_image")) {
        ImageRecord rec;
        rec.index = p.at("index").get<std::size_t>();
        rec.label = p.at("label").get<std::size_t>();
        rec.white_box_eligible = p.at("wb_eligible").get<bool>();
        rec.white_box_hit = p.at("wb_hit").get<bool>();
        rec.target_hits = p.at("target_hits").get<std::vector<int>>();
        rec.ms_ssim = p.at("ms_ssim").get<double>();
        r.per_image.push_back(std::move(rec));
    }
    return r;
}

} // namespace

std::string reports_to_json(std::span<const AttackReport> reports,
                            const std::string& config_echo_json, std::uint64_t seed) {
    ordered_json doc;
    doc["schema_version"] = 1;
    doc["seed"] = seed;
    if (config_echo_json.empty()) {
        doc["config"] = nullptr;
    } else {
        auto echo = ordered_json::parse(config_echo_json, nullptr, false);
        if (echo.is_discarded()) throw ContractError("reports_to_json: config echo is not valid JSON");
        doc["config"] = echo;
    }
    doc["runs"] = ordered_json::array();
    for (const AttackReport& r : reports) doc["runs"].push_back(report_to_json(r));
    return doc.dump(2) + "\n";
}

ParsedReports reports_from_json(const std::string& text) {
    auto doc = ordered_json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw FormatError("report: unparsable JSON document");
    if (!doc.contains("schema_version") || doc.at("schema_version").get<int>() != 1)
        throw FormatError("report: unsupported schema version");
    ParsedReports out;
    out.seed = doc.at("seed").get<std::uint64_t>();
    out.config_echo_json = doc.at("config").is_null() ? "" : doc.at("config").dump();
    for (const auto& run : doc.at("runs")) out.runs.push_back(report_from_json(run));
    return out;
}

namespace {

std::string percent_or_na(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", *v);
    return buf;
}

} // namespace

std::string format_report_table(std::span<const AttackReport> reports) {
    std::vector<std::string> headers{"run", "white-box"};
    if (!reports.empty())
        for (const TargetOutcome& t : reports[0].targets) headers.push_back(t.name);
    headers.push_back("average");

    std::vector<std::vector<std::string>> rows;
    for (const AttackReport& r : reports) {
        std::vector<std::string> row{r.label, percent_or_na(r.white_box_rate_percent)};
        for (const TargetOutcome& t : r.targets) row.push_back(percent_or_na(t.rate_percent));
        row.push_back(percent_or_na(r.average_transfer_percent));
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> widths(headers.size());
    for (std::size_t c = 0; c < headers.size(); ++c) {
        widths[c] = headers[c].size();
        for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
    }

    std::string out;
    auto append_row = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            out += cells[c];
            if (c + 1 < cells.size()) out.append(widths[c] - cells[c].size() + 2, ' ');
        }
        out += '\n';
    };
    append_row(headers);
    for (const auto& row : rows) append_row(row);
    return out;
}

void emit_report(std::span<const AttackReport> reports, const std::string& config_echo_json,
                 std::uint64_t seed, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    {
        std::ofstream json_file(directory / "report.json", std::ios::binary | std::ios::trunc);
        if (!json_file) throw IoError("cannot write " + (directory / "report.json").string());
        json_file << reports_to_json(reports, config_echo_json, seed);
    }
    {
        std::ofstream table_file(directory / "report.txt", std::ios::binary | std::ios::trunc);
        if (!table_file) throw IoError("cannot write " + (directory / "report.txt").string());
        table_file << format_report_table(reports);
    }
}

std::string sweep_to_csv(std::span<const SweepRecord> records) {
    std::string out = "P,gate_mode,average_rate_percent";
    if (!records.empty())
        for (const TargetOutcome& t : records[0].targets) out += "," + t.name + "_rate_percent";
    out += '\n';
    char buf[64];
    for (const SweepRecord& rec : records) {
        std::snprintf(buf, sizeof(buf), "%.4f", rec.threshold);
        out += buf;
        out += ',';
        out += gate_mode_name(rec.gate_mode);
        auto append_rate = [&](const std::optional<double>& r) {
            if (r) {
                std::snprintf(buf, sizeof(buf), ",%.4f", *r);
                out += buf;
            } else {
                out += ",";
            }
        };
        append_rate(rec.average_rate_percent);
        for (const TargetOutcome& t : rec.targets) append_rate(t.rate_percent);
        out += '\n';
    }
    return out;
}

} // namespace sapr
