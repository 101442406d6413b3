#include "sapr/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "sapr/checkpoint.hpp"
#include "sapr/image_io.hpp"
#include "sapr/rng.hpp"

namespace sapr {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kTrainSplitTag = 0x747261696eull; // "train"
constexpr std::uint64_t kTestSplitTag = 0x74657374ull;    // "test"

void check_keys(const ordered_json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_or(const ordered_json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config: bad value type for '") + key + "'");
    }
}

std::string slugify(const std::string& label) {
    std::string s;
    for (char c : label) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else
            s.push_back('_');
    }
    return s;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("short write to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

ExperimentConfig ExperimentConfig::load_file(const std::filesystem::path& path) {
    return from_json_text(read_text_file(path));
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    auto doc = ordered_json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config: malformed JSON document");
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(doc, "top level",
               {"seed", "output_dir", "workers", "dataset", "model", "train", "attack", "sweep",
                "eval"});

    ExperimentConfig cfg;
    cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
    cfg.output_dir = get_or<std::string>(doc, "output_dir", "runs/out");
    cfg.workers = get_or<std::size_t>(doc, "workers", 0);

    if (doc.contains("dataset")) {
        const auto& ds = doc.at("dataset");
        check_keys(ds, "dataset",
                   {"kind", "num_classes", "per_class_train", "per_class_test", "image_size",
                    "channels", "idx"});
        cfg.dataset.kind = get_or<std::string>(ds, "kind", "synthetic");
        if (cfg.dataset.kind != "synthetic" && cfg.dataset.kind != "idx")
            throw ConfigError("config: dataset.kind must be 'synthetic' or 'idx'");
        cfg.dataset.num_classes = get_or<std::size_t>(ds, "num_classes", 8);
        cfg.dataset.per_class_train = get_or<std::size_t>(ds, "per_class_train", 128);
        cfg.dataset.per_class_test = get_or<std::size_t>(ds, "per_class_test", 32);
        cfg.dataset.image_size = get_or<std::size_t>(ds, "image_size", 32);
        cfg.dataset.channels = get_or<std::size_t>(ds, "channels", 3);
        if (ds.contains("idx")) {
            const auto& idx = ds.at("idx");
            check_keys(idx, "dataset.idx",
                       {"train_images", "train_labels", "test_images", "test_labels"});
            cfg.dataset.idx_train_images = get_or<std::string>(idx, "train_images", "");
            cfg.dataset.idx_train_labels = get_or<std::string>(idx, "train_labels", "");
            cfg.dataset.idx_test_images = get_or<std::string>(idx, "test_images", "");
            cfg.dataset.idx_test_labels = get_or<std::string>(idx, "test_labels", "");
        }
        if (cfg.dataset.kind == "idx" &&
            (cfg.dataset.idx_train_images.empty() || cfg.dataset.idx_train_labels.empty() ||
             cfg.dataset.idx_test_images.empty() || cfg.dataset.idx_test_labels.empty()))
            throw ConfigError("config: dataset.kind 'idx' needs all four dataset.idx paths");
    }

    cfg.vit.image_size = cfg.dataset.image_size;
    cfg.vit.channels = cfg.dataset.channels;
    cfg.vit.num_classes = cfg.dataset.num_classes;

    bool have_targets = false;
    if (doc.contains("model")) {
        const auto& model = doc.at("model");
        check_keys(model, "model", {"vit", "targets"});
        if (model.contains("vit")) {
            const auto& vit = model.at("vit");
            check_keys(vit, "model.vit",
                       {"patch_size", "embed_dim", "num_heads", "num_blocks", "mlp_ratio"});
            cfg.vit.patch_size = get_or<std::size_t>(vit, "patch_size", 4);
            cfg.vit.embed_dim = get_or<std::size_t>(vit, "embed_dim", 64);
            cfg.vit.num_heads = get_or<std::size_t>(vit, "num_heads", 4);
            cfg.vit.num_blocks = get_or<std::size_t>(vit, "num_blocks", 4);
            cfg.vit.mlp_ratio = get_or<std::size_t>(vit, "mlp_ratio", 4);
        }
        if (model.contains("targets")) {
            have_targets = true;
            if (!model.at("targets").is_array())
                throw ConfigError("config: model.targets must be an array");
            for (const auto& t : model.at("targets")) {
                check_keys(t, "model.targets[]",
                           {"name", "kind", "conv1_filters", "conv2_filters", "hidden",
                            "patch_size", "channel_hidden"});
                TargetSpec spec;
                spec.kind = get_or<std::string>(t, "kind", "cnn");
                spec.name = get_or<std::string>(t, "name", spec.kind);
                if (spec.kind == "cnn") {
                    spec.cnn.image_size = cfg.dataset.image_size;
                    spec.cnn.channels = cfg.dataset.channels;
                    spec.cnn.num_classes = cfg.dataset.num_classes;
                    spec.cnn.conv1_filters = get_or<std::size_t>(t, "conv1_filters", 8);
                    spec.cnn.conv2_filters = get_or<std::size_t>(t, "conv2_filters", 16);
                    spec.cnn.hidden = get_or<std::size_t>(t, "hidden", 64);
                } else if (spec.kind == "mlp") {
                    spec.mlp.image_size = cfg.dataset.image_size;
                    spec.mlp.channels = cfg.dataset.channels;
                    spec.mlp.num_classes = cfg.dataset.num_classes;
                    spec.mlp.patch_size = get_or<std::size_t>(t, "patch_size", 4);
                    spec.mlp.channel_hidden = get_or<std::size_t>(t, "channel_hidden", 32);
                } else {
                    throw ConfigError("config: target kind must be 'cnn' or 'mlp', got '" +
                                      spec.kind + "'");
                }
                cfg.targets.push_back(std::move(spec));
            }
        }
    }
    if (!have_targets) {
        TargetSpec cnn;
        cnn.name = "cnn";
        cnn.kind = "cnn";
        cnn.cnn.image_size = cfg.dataset.image_size;
        cnn.cnn.channels = cfg.dataset.channels;
        cnn.cnn.num_classes = cfg.dataset.num_classes;
        TargetSpec mlp;
        mlp.name = "mlp";
        mlp.kind = "mlp";
        mlp.mlp.image_size = cfg.dataset.image_size;
        mlp.mlp.channels = cfg.dataset.channels;
        mlp.mlp.num_classes = cfg.dataset.num_classes;
        cfg.targets.push_back(std::move(cnn));
        cfg.targets.push_back(std::move(mlp));
    }
    {
        std::set<std::string> names;
        for (const auto& t : cfg.targets)
            if (!names.insert(t.name).second)
                throw ConfigError("config: duplicate target name '" + t.name + "'");
    }

    if (doc.contains("train")) {
        const auto& tr = doc.at("train");
        check_keys(tr, "train", {"epochs", "batch_size", "learning_rate", "momentum"});
        cfg.train.epochs = get_or<std::size_t>(tr, "epochs", 20);
        cfg.train.batch_size = get_or<std::size_t>(tr, "batch_size", 16);
        cfg.train.learning_rate = get_or<double>(tr, "learning_rate", 0.05);
        cfg.train.momentum = get_or<double>(tr, "momentum", 0.9);
    }
    cfg.train.seed = cfg.seed;
    cfg.train.workers = cfg.workers;

    if (doc.contains("attack")) {
        const auto& at = doc.at("attack");
        check_keys(at, "attack",
                   {"methods", "variants", "num_images", "epsilon", "alpha", "iterations",
                    "momentum_decay", "dim_transform_prob", "sim_scales",
                    "restructure_threshold", "gate_mode", "sign_update", "export_images"});
        if (at.contains("methods")) {
            cfg.attack.methods.clear();
            for (const auto& m : at.at("methods"))
                cfg.attack.methods.push_back(attack_method_from_name(m.get<std::string>()));
            if (cfg.attack.methods.empty())
                throw ConfigError("config: attack.methods must not be empty");
        }
        if (at.contains("variants")) {
            cfg.attack.run_plain = false;
            cfg.attack.run_sapr = false;
            for (const auto& v : at.at("variants")) {
                const std::string name = v.get<std::string>();
                if (name == "plain")
                    cfg.attack.run_plain = true;
                else if (name == "sapr")
                    cfg.attack.run_sapr = true;
                else
                    throw ConfigError("config: attack variant must be 'plain' or 'sapr', got '" +
                                      name + "'");
            }
            if (!cfg.attack.run_plain && !cfg.attack.run_sapr)
                throw ConfigError("config: attack.variants must not be empty");
        }
        cfg.attack.num_images = get_or<std::size_t>(at, "num_images", 200);
        cfg.attack.base.epsilon = get_or<double>(at, "epsilon", 16.0);
        cfg.attack.base.alpha = get_or<double>(at, "alpha", 0.0);
        cfg.attack.base.iterations = get_or<std::size_t>(at, "iterations", 50);
        cfg.attack.base.momentum_decay = get_or<double>(at, "momentum_decay", 1.0);
        cfg.attack.base.dim_transform_prob = get_or<double>(at, "dim_transform_prob", 0.5);
        cfg.attack.base.sim_scales = get_or<std::size_t>(at, "sim_scales", 5);
        cfg.attack.base.restructure_threshold = get_or<double>(at, "restructure_threshold", 0.3);
        cfg.attack.base.gate_mode =
            gate_mode_from_name(get_or<std::string>(at, "gate_mode", "uniform"));
        cfg.attack.base.sign_update = get_or<bool>(at, "sign_update", true);
        cfg.attack.export_images = get_or<bool>(at, "export_images", true);
    }
    cfg.attack.base.seed = cfg.seed;
    cfg.attack.base.validate();

    cfg.sweep.grid.clear();
    if (doc.contains("sweep")) {
        const auto& sw = doc.at("sweep");
        check_keys(sw, "sweep", {"method", "grid", "num_images"});
        cfg.sweep.method = attack_method_from_name(get_or<std::string>(sw, "method", "MIM"));
        if (sw.contains("grid")) cfg.sweep.grid = sw.at("grid").get<std::vector<double>>();
        cfg.sweep.num_images = get_or<std::size_t>(sw, "num_images", 64);
    }
    if (cfg.sweep.grid.empty())
        for (int i = 0; i <= 18; ++i) cfg.sweep.grid.push_back(0.05 * i);

    if (doc.contains("eval")) {
        const auto& ev = doc.at("eval");
        check_keys(ev, "eval", {"targets"});
        if (ev.contains("targets")) cfg.eval_targets = ev.at("targets").get<std::vector<std::string>>();
    }
    if (cfg.eval_targets.empty())
        for (const auto& t : cfg.targets) cfg.eval_targets.push_back(t.name);
    for (const auto& name : cfg.eval_targets) {
        const bool known = std::any_of(cfg.targets.begin(), cfg.targets.end(),
                                       [&](const TargetSpec& t) { return t.name == name; });
        if (!known) throw ConfigError("config: eval target '" + name + "' is not a configured target");
    }

    cfg.echo_json = doc.dump();
    return cfg;
}

Dataset experiment_train_split(const ExperimentConfig& cfg) {
    if (cfg.dataset.kind == "idx")
        return load_idx_dataset(cfg.dataset.idx_train_images, cfg.dataset.idx_train_labels,
                                cfg.dataset.image_size, cfg.dataset.channels, "train");
    return generate_synthetic_dataset(cfg.dataset.num_classes, cfg.dataset.per_class_train,
                                      cfg.dataset.image_size,
                                      RngStream::mix_keys(cfg.seed, {kTrainSplitTag}),
                                      cfg.dataset.channels, "train");
}

Dataset experiment_test_split(const ExperimentConfig& cfg) {
    if (cfg.dataset.kind == "idx")
        return load_idx_dataset(cfg.dataset.idx_test_images, cfg.dataset.idx_test_labels,
                                cfg.dataset.image_size, cfg.dataset.channels, "test");
    return generate_synthetic_dataset(cfg.dataset.num_classes, cfg.dataset.per_class_test,
                                      cfg.dataset.image_size,
                                      RngStream::mix_keys(cfg.seed, {kTestSplitTag}),
                                      cfg.dataset.channels, "test");
}

namespace {

std::string curve_csv(const TrainResult& result) {
    std::string csv = "epoch,train_loss,train_accuracy\n";
    char buf[96];
    for (const EpochStats& e : result.curve) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f\n", e.epoch, e.train_loss, e.train_accuracy);
        csv += buf;
    }
    return csv;
}

std::filesystem::path checkpoint_path(const ExperimentConfig& cfg, const std::string& name) {
    return cfg.output_dir / "checkpoints" / (name + ".ckpt");
}

std::vector<EvalTarget> load_eval_targets(const ExperimentConfig& cfg) {
    std::vector<EvalTarget> targets;
    for (const std::string& name : cfg.eval_targets)
        targets.push_back({name, load_transfer_checkpoint(checkpoint_path(cfg, name))});
    return targets;
}

struct AttackInputs {
    std::vector<Tensor> images;
    std::vector<std::size_t> labels;
};

// Test images the white box classifies correctly, in index order.
AttackInputs select_attack_images(const ExperimentConfig& cfg, const ViTModel& vit,
                                  const Dataset& test, std::size_t wanted, std::ostream& log) {
    std::vector<unsigned char> correct(test.count(), 0);
    parallel_for(test.count(), cfg.workers, [&](std::size_t i) {
        correct[i] = vit.predict(test.image(i)) == test.label(i) ? 1 : 0;
    });
    AttackInputs inputs;
    for (std::size_t i = 0; i < test.count() && inputs.images.size() < wanted; ++i) {
        if (!correct[i]) continue;
        inputs.images.push_back(test.image(i));
        inputs.labels.push_back(test.label(i));
    }
    if (inputs.images.size() < wanted)
        log << "note: only " << inputs.images.size() << " clean-correct test images available ("
            << wanted << " requested)\n";
    return inputs;
}

struct RunSpec {
    std::string label;
    AttackConfig config;
};

std::vector<RunSpec> attack_run_specs(const ExperimentConfig& cfg) {
    std::vector<RunSpec> specs;
    for (AttackMethod method : cfg.attack.methods) {
        if (cfg.attack.run_plain) {
            AttackConfig ac = cfg.attack.base;
            ac.method = method;
            ac.sapr_enabled = false;
            specs.push_back({attack_method_name(method), ac});
        }
        if (cfg.attack.run_sapr) {
            AttackConfig ac = cfg.attack.base;
            ac.method = method;
            ac.sapr_enabled = true;
            specs.push_back({std::string(attack_method_name(method)) + "+SAPR", ac});
        }
    }
    return specs;
}

} // namespace

void run_training(const ExperimentConfig& cfg, std::ostream& log) {
    const Dataset train = experiment_train_split(cfg);
    const Dataset test = experiment_test_split(cfg);
    log << "dataset: " << train.count() << " train / " << test.count() << " test images, "
        << train.num_classes << " classes\n";

    {
        ViTModel vit = ViTModel::random_init(cfg.vit, RngStream::mix_keys(cfg.seed, {1}));
        TrainResult result = train_model(vit, train, cfg.train);
        const double acc = classification_accuracy(vit, test, cfg.workers);
        log << "vit: final train acc " << result.curve.back().train_accuracy << ", test acc " << acc
            << "\n";
        save_checkpoint(vit, checkpoint_path(cfg, "vit"));
        write_text_file(cfg.output_dir / "train_curves" / "vit.csv", curve_csv(result));
    }

    for (std::size_t t = 0; t < cfg.targets.size(); ++t) {
        const auto& spec = cfg.targets[t];
        const std::uint64_t seed = RngStream::mix_keys(cfg.seed, {2, t});
        TrainResult result;
        double acc = 0.0;
        if (spec.kind == "cnn") {
            CnnModel m = CnnModel::random_init(spec.cnn, seed);
            result = train_model(m, train, cfg.train);
            acc = classification_accuracy(m, test, cfg.workers);
            save_checkpoint(m, checkpoint_path(cfg, spec.name));
        } else {
            MlpModel m = MlpModel::random_init(spec.mlp, seed);
            result = train_model(m, train, cfg.train);
            acc = classification_accuracy(m, test, cfg.workers);
            save_checkpoint(m, checkpoint_path(cfg, spec.name));
        }
        log << spec.name << ": final train acc " << result.curve.back().train_accuracy
            << ", test acc " << acc << "\n";
        write_text_file(cfg.output_dir / "train_curves" / (spec.name + ".csv"), curve_csv(result));
    }
    write_text_file(cfg.output_dir / "config_echo.json", cfg.echo_json + "\n");
}

void run_attack_experiment(const ExperimentConfig& cfg, std::ostream& log, bool check_budget) {
    const ViTModel vit = load_vit_checkpoint(checkpoint_path(cfg, "vit"));
    const std::vector<EvalTarget> targets = load_eval_targets(cfg);
    const Dataset test = experiment_test_split(cfg);
    AttackInputs inputs = select_attack_images(cfg, vit, test, cfg.attack.num_images, log);

    IterationObserver observer;
    if (check_budget) {
        observer = [&inputs, eps = cfg.attack.base.epsilon](std::uint64_t image_id,
                                                            std::size_t iteration,
                                                            const Tensor& x_adv) {
            const auto xv = inputs.images[image_id].values();
            const auto av = x_adv.values();
            for (std::size_t i = 0; i < av.size(); ++i) {
                if (std::abs(av[i] - xv[i]) > eps || av[i] < 0.0 || av[i] > 255.0)
                    throw NumericError("budget violation at image " + std::to_string(image_id) +
                                       " iteration " + std::to_string(iteration));
            }
        };
    }

    ordered_json manifest;
    manifest["schema_version"] = 1;
    manifest["seed"] = cfg.seed;
    manifest["epsilon"] = cfg.attack.base.epsilon;
    manifest["config"] = ordered_json::parse(cfg.echo_json);
    manifest["runs"] = ordered_json::array();

    std::vector<AttackReport> reports;
    for (const RunSpec& spec : attack_run_specs(cfg)) {
        log << "attacking: " << spec.label << " on " << inputs.images.size() << " images\n";
        auto examples =
            run_attack_batch(inputs.images, inputs.labels, vit, spec.config, cfg.workers, observer);
        for (auto& ex : examples) {
            ex = quantize_to_pixel_grid(ex, spec.config.epsilon);
            ex.adversarial_prediction = vit.predict(ex.adversarial);
        }
        AttackReport report = transfer_success_rate(examples, targets, cfg.workers);
        report.label = spec.label;
        log << "  white-box rate: "
            << (report.white_box_rate_percent ? std::to_string(*report.white_box_rate_percent)
                                              : std::string("n/a"))
            << "%, avg transfer: "
            << (report.average_transfer_percent ? std::to_string(*report.average_transfer_percent)
                                                : std::string("n/a"))
            << "%\n";

        ordered_json run_entry;
        run_entry["label"] = spec.label;
        run_entry["method"] = attack_method_name(spec.config.method);
        run_entry["sapr_enabled"] = spec.config.sapr_enabled;
        run_entry["restructure_threshold"] = spec.config.restructure_threshold;
        run_entry["images"] = ordered_json::array();
        if (cfg.attack.export_images) {
            const std::string slug = slugify(spec.label);
            for (std::size_t i = 0; i < examples.size(); ++i) {
                char stem[32];
                std::snprintf(stem, sizeof(stem), "img_%04zu", i);
                const std::string base = "examples/" + slug + "/" + stem;
                export_image(examples[i].original, cfg.output_dir / (base + "_clean.ppm"));
                export_image(examples[i].adversarial, cfg.output_dir / (base + "_adv.ppm"));
                export_delta_image(examples[i].delta(), cfg.output_dir / (base + "_delta.ppm"));
                run_entry["images"].push_back({{"index", i},
                                               {"label", examples[i].label},
                                               {"clean", base + "_clean.ppm"},
                                               {"adv", base + "_adv.ppm"}});
            }
        }
        manifest["runs"].push_back(std::move(run_entry));
        reports.push_back(std::move(report));
    }

    emit_report(reports, cfg.echo_json, cfg.seed, cfg.output_dir);
    write_text_file(cfg.output_dir / "manifest.json", manifest.dump(2) + "\n");
    log << "report written to " << (cfg.output_dir / "report.json").string() << "\n";
}

void run_sweep_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    const ViTModel vit = load_vit_checkpoint(checkpoint_path(cfg, "vit"));
    const std::vector<EvalTarget> targets = load_eval_targets(cfg);
    const Dataset test = experiment_test_split(cfg);
    AttackInputs inputs = select_attack_images(cfg, vit, test, cfg.sweep.num_images, log);

    AttackConfig base = cfg.attack.base;
    base.method = cfg.sweep.method;
    log << "sweep: " << cfg.sweep.grid.size() << " thresholds, " << inputs.images.size()
        << " images each\n";
    auto records = p_sweep(cfg.sweep.grid, base, vit, targets, inputs.images, inputs.labels,
                           cfg.workers);
    write_text_file(cfg.output_dir / "sweep.csv", sweep_to_csv(records));
    log << "sweep written to " << (cfg.output_dir / "sweep.csv").string() << "\n";
}

void run_eval_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    const ViTModel vit = load_vit_checkpoint(checkpoint_path(cfg, "vit"));
    const std::vector<EvalTarget> targets = load_eval_targets(cfg);

    const auto manifest_path = cfg.output_dir / "manifest.json";
    auto manifest = ordered_json::parse(read_text_file(manifest_path), nullptr, false);
    if (manifest.is_discarded())
        throw FormatError("manifest " + manifest_path.string() + ": unparsable JSON");
    if (manifest.at("schema_version").get<int>() != 1)
        throw FormatError("manifest: unsupported schema version");

    std::vector<AttackReport> reports;
    for (const auto& run : manifest.at("runs")) {
        const auto& image_list = run.at("images");
        if (image_list.empty())
            throw FormatError("manifest run '" + run.at("label").get<std::string>() +
                              "' lists no images (was the attack run with export_images=false?)");
        std::vector<AdversarialExample> examples(image_list.size());
        parallel_for(image_list.size(), cfg.workers, [&](std::size_t i) {
            const auto& entry = image_list[i];
            AdversarialExample ex;
            ex.original = import_image(cfg.output_dir / entry.at("clean").get<std::string>());
            ex.adversarial = import_image(cfg.output_dir / entry.at("adv").get<std::string>());
            ex.label = entry.at("label").get<std::size_t>();
            ex.clean_prediction = vit.predict(ex.original);
            ex.adversarial_prediction = vit.predict(ex.adversarial);
            examples[i] = std::move(ex);
        });
        AttackReport report = transfer_success_rate(examples, targets, cfg.workers);
        report.label = run.at("label").get<std::string>();
        reports.push_back(std::move(report));
        log << "evaluated " << examples.size() << " examples for run " << reports.back().label
            << "\n";
    }

    const std::string json = reports_to_json(reports, cfg.echo_json, cfg.seed);
    write_text_file(cfg.output_dir / "eval_report.json", json);
    write_text_file(cfg.output_dir / "eval_report.txt", format_report_table(reports));
    log << "eval report written to " << (cfg.output_dir / "eval_report.json").string() << "\n";
}

} // namespace sapr
