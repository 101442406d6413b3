#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "sapr/eval.hpp"
#include "sapr/rng.hpp"
#include "sapr/train.hpp"

using namespace sapr;

namespace {

struct Fixture {
    Dataset data = generate_synthetic_dataset(2, 24, 16, 31, 3, "train");
    CnnModel cnn;

    Fixture() : cnn(make_cnn()) {}

    CnnModel make_cnn() {
        CnnConfig cfg;
        cfg.image_size = 16;
        cfg.num_classes = 2;
        CnnModel m = CnnModel::random_init(cfg, 1);
        TrainOptions opts;
        opts.epochs = 8;
        opts.batch_size = 12;
        opts.learning_rate = 0.05;
        TrainResult r = train_model(m, data, opts);
        REQUIRE(r.curve.back().train_accuracy == 1.0);
        return m;
    }

    Tensor image_of_class(std::size_t cls, std::size_t nth = 0) const {
        std::size_t seen = 0;
        for (std::size_t i = 0; i < data.count(); ++i) {
            if (data.label(i) == cls && seen++ == nth) return data.image(i);
        }
        FAIL("class image not found");
        return {};
    }

    AdversarialExample example(std::size_t label, const Tensor& original, const Tensor& adversarial,
                               bool wb_hit) const {
        AdversarialExample ex;
        ex.original = original;
        ex.adversarial = adversarial;
        ex.label = label;
        ex.clean_prediction = label;
        ex.adversarial_prediction = wb_hit ? (label + 1) % 2 : label;
        return ex;
    }
};

} // namespace

TEST_CASE("transfer rate is 0% when the target still classifies everything") {
    Fixture f;
    std::vector<AdversarialExample> examples;
    for (std::size_t i = 0; i < 3; ++i) {
        Tensor img = f.image_of_class(0, i);
        examples.push_back(f.example(0, img, img, false));
    }
    const EvalTarget targets[] = {{"cnn", f.cnn}};
    AttackReport report = transfer_success_rate(examples, targets);
    REQUIRE(report.targets.size() == 1);
    CHECK(report.targets[0].eligible == 3);
    CHECK(report.targets[0].hits == 0);
    CHECK(*report.targets[0].rate_percent == 0.0);
    CHECK(*report.average_transfer_percent == 0.0);
    CHECK(report.mean_ms_ssim == 1.0);
}

TEST_CASE("transfer rate is 100% when every adversarial image flips the target") {
    Fixture f;
    std::vector<AdversarialExample> examples;
    for (std::size_t i = 0; i < 3; ++i)
        examples.push_back(f.example(0, f.image_of_class(0, i), f.image_of_class(1, i), true));
    const EvalTarget targets[] = {{"cnn", f.cnn}};
    AttackReport report = transfer_success_rate(examples, targets);
    CHECK(report.targets[0].eligible == 3);
    CHECK(report.targets[0].hits == 3);
    CHECK(*report.targets[0].rate_percent == 100.0);
    CHECK(*report.white_box_rate_percent == 100.0);
}

TEST_CASE("a hand-built batch of 3 with 2 hits reports 66.67%") {
    Fixture f;
    std::vector<AdversarialExample> examples;
    examples.push_back(f.example(0, f.image_of_class(0, 0), f.image_of_class(1, 0), true));
    examples.push_back(f.example(0, f.image_of_class(0, 1), f.image_of_class(1, 1), true));
    examples.push_back(f.example(0, f.image_of_class(0, 2), f.image_of_class(0, 3), false));
    const EvalTarget targets[] = {{"cnn", f.cnn}};
    AttackReport report = transfer_success_rate(examples, targets);
    CHECK(report.targets[0].eligible == 3);
    CHECK(report.targets[0].hits == 2);
    CHECK(*report.targets[0].rate_percent == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("clean-incorrect examples are excluded per target") {
    Fixture f;
    std::vector<AdversarialExample> examples;
    // Labelled 1 but the clean image is class 0: the CNN rejects it as
    // clean-incorrect, so the example never counts.
    examples.push_back(f.example(1, f.image_of_class(0, 0), f.image_of_class(1, 0), false));
    examples.push_back(f.example(0, f.image_of_class(0, 1), f.image_of_class(1, 1), true));
    const EvalTarget targets[] = {{"cnn", f.cnn}};
    AttackReport report = transfer_success_rate(examples, targets);
    CHECK(report.targets[0].eligible == 1);
    CHECK(report.targets[0].hits == 1);
    CHECK(report.per_image[0].target_hits[0] == -1);
}

TEST_CASE("zero eligible examples leave the rate undefined and off the average") {
    Fixture f;
    std::vector<AdversarialExample> examples;
    examples.push_back(f.example(1, f.image_of_class(0, 0), f.image_of_class(0, 1), false));
    const EvalTarget targets[] = {{"cnn", f.cnn}};
    AttackReport report = transfer_success_rate(examples, targets);
    CHECK(report.targets[0].eligible == 0);
    CHECK(!report.targets[0].rate_percent.has_value());
    CHECK(!report.average_transfer_percent.has_value());
}

TEST_CASE("average equals the mean of defined per-target rates") {
    Fixture f;
    // Second target: an untrained CNN with different predictions.
    CnnConfig cfg;
    cfg.image_size = 16;
    cfg.num_classes = 2;
    CnnModel fresh = CnnModel::random_init(cfg, 99);
    std::vector<AdversarialExample> examples;
    for (std::size_t i = 0; i < 4; ++i)
        examples.push_back(f.example(0, f.image_of_class(0, i), f.image_of_class(1, i), true));
    const EvalTarget targets[] = {{"trained", f.cnn}, {"fresh", fresh}};
    AttackReport report = transfer_success_rate(examples, targets);
    double expect = 0.0;
    std::size_t n = 0;
    for (const auto& t : report.targets)
        if (t.rate_percent) {
            expect += *t.rate_percent;
            ++n;
        }
    if (n > 0)
        CHECK(*report.average_transfer_percent == doctest::Approx(expect / n).epsilon(1e-12));
}

TEST_CASE("report JSON round trips exactly") {
    Fixture f;
    std::vector<AdversarialExample> examples;
    examples.push_back(f.example(0, f.image_of_class(0, 0), f.image_of_class(1, 0), true));
    examples.push_back(f.example(1, f.image_of_class(1, 1), f.image_of_class(1, 2), false));
    const EvalTarget targets[] = {{"cnn", f.cnn}};
    AttackReport report = transfer_success_rate(examples, targets);
    report.label = "MIM";

    const AttackReport reports[] = {report};
    const std::string json = reports_to_json(reports, R"({"seed":7})", 7);
    ParsedReports parsed = reports_from_json(json);
    REQUIRE(parsed.runs.size() == 1);
    CHECK(parsed.seed == 7);
    CHECK(parsed.runs[0] == report);
    const AttackReport reparsed[] = {parsed.runs[0]};
    CHECK(reports_to_json(reparsed, parsed.config_echo_json, parsed.seed) == json);
}

TEST_CASE("empty example set produces a valid zero-count report") {
    Fixture f;
    const EvalTarget targets[] = {{"cnn", f.cnn}};
    AttackReport report = transfer_success_rate({}, targets);
    CHECK(report.image_count == 0);
    CHECK(report.white_box_eligible == 0);
    CHECK(!report.white_box_rate_percent.has_value());
    CHECK(report.mean_ms_ssim == 0.0);

    auto dir = std::filesystem::temp_directory_path() / "sapr_eval_tests";
    report.label = "MIM";
    const AttackReport reports[] = {report};
    emit_report(reports, "", 0, dir);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "report.txt"));
    ParsedReports parsed = reports_from_json([&] {
        std::ifstream in(dir / "report.json", std::ios::binary);
        return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }());
    CHECK(parsed.runs[0] == report);
}

TEST_CASE("table format is frozen for a fixture report") {
    AttackReport a;
    a.label = "MIM";
    a.white_box_rate_percent = 95.0;
    a.targets = {{"cnn", 40, 10, 25.0}, {"mlp", 0, 0, std::nullopt}};
    a.average_transfer_percent = 25.0;
    AttackReport b;
    b.label = "MIM+SAPR";
    b.white_box_rate_percent = 97.5;
    b.targets = {{"cnn", 40, 20, 50.0}, {"mlp", 40, 15, 37.5}};
    b.average_transfer_percent = 43.75;

    const AttackReport reports[] = {a, b};
    const std::string expected = "run       white-box  cnn     mlp     average\n"
                                 "MIM       95.00%     25.00%  n/a     25.00%\n"
                                 "MIM+SAPR  97.50%     50.00%  37.50%  43.75%\n";
    CHECK(format_report_table(reports) == expected);
}

TEST_CASE("sweep CSV lists one sorted row per grid point") {
    SweepRecord r1{0.0, GateMode::uniform, 12.5, {{"cnn", 8, 1, 12.5}}};
    SweepRecord r2{0.3, GateMode::uniform, std::nullopt, {{"cnn", 0, 0, std::nullopt}}};
    const SweepRecord records[] = {r1, r2};
    const std::string expected = "P,gate_mode,average_rate_percent,cnn_rate_percent\n"
                                 "0.0000,uniform,12.5000,12.5000\n"
                                 "0.3000,uniform,,\n";
    CHECK(sweep_to_csv(records) == expected);
}

TEST_CASE("p_sweep at P=0 reproduces the no-restructuring baseline") {
    ViTConfig vcfg;
    vcfg.image_size = 16;
    vcfg.patch_size = 4;
    vcfg.embed_dim = 24;
    vcfg.num_heads = 3;
    vcfg.num_blocks = 2;
    vcfg.mlp_ratio = 2;
    vcfg.num_classes = 2;
    ViTModel vit = ViTModel::random_init(vcfg, 5);

    Fixture f;
    std::vector<Tensor> images;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 4; ++i) {
        images.push_back(f.image_of_class(i % 2, i));
        labels.push_back(i % 2);
    }
    AttackConfig base;
    base.iterations = 4;
    base.seed = 77;
    const EvalTarget targets[] = {{"cnn", f.cnn}};

    auto records = p_sweep(std::vector<double>{0.0}, base, vit, targets, images, labels, 2);
    REQUIRE(records.size() == 1);

    AttackConfig plain = base;
    plain.sapr_enabled = false;
    auto examples = run_attack_batch(images, labels, vit, plain, 2);
    AttackReport baseline = transfer_success_rate(examples, targets, 2);
    CHECK(records[0].average_rate_percent == baseline.average_transfer_percent);
    CHECK(records[0].targets[0].hits == baseline.targets[0].hits);
    CHECK(records[0].targets[0].eligible == baseline.targets[0].eligible);

    CHECK_THROWS_AS(p_sweep(std::vector<double>{}, base, vit, targets, images, labels, 1),
                    ConfigError);
}
