#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hllm/checkpoint.hpp"
#include "hllm/config.hpp"
#include "hllm/corpus.hpp"
#include "hllm/embcache.hpp"
#include "hllm/error.hpp"
#include "hllm/evalkit.hpp"
#include "hllm/item_encoder.hpp"
#include "hllm/model.hpp"
#include "hllm/objectives.hpp"
#include "hllm/trainer.hpp"

namespace {

struct CliFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    uint64_t seed{0};
    std::string output_dir;
    bool deterministic{false};
};

void add_common_options(CLI::App* sub, CliFlags* f) {
    sub->add_option("--config", f->config_path, "JSON run config file")->required();
    sub->add_option("--set", f->overrides,
                    "Override one config key as key=value; the value is parsed as a JSON "
                    "literal, or taken as a string when that fails (repeatable)");
    sub->add_option("--seed", f->seed, "Shorthand for --set seed=N");
    sub->add_option("--output-dir", f->output_dir, "Shorthand for --set output_dir=DIR");
    sub->add_flag("--deterministic", f->deterministic,
                  "Shorthand for --set deterministic=true (zeroes report timings)");
}

// Precedence, lowest to highest: config file, environment, --set in the
// order given, dedicated flags.
hllm::RunConfig resolve_config(const CLI::App* sub, const CliFlags& f) {
    hllm::RunConfig cfg = hllm::RunConfig::from_file(f.config_path);
    if (const char* dir = std::getenv("HLLM_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
        cfg.output_dir = dir;
    }
    if (const char* threads = std::getenv("HLLM_THREADS"); threads != nullptr && *threads != '\0') {
        char* end = nullptr;
        const long n = std::strtol(threads, &end, 10);
        if (end == threads || *end != '\0' || n < 1) {
            throw hllm::ConfigError(std::string("HLLM_THREADS must be a positive integer, got '") +
                                    threads + "'");
        }
        // Execution is single threaded regardless; the value is only validated.
    }
    for (const std::string& kv : f.overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw hllm::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (sub->count("--seed") > 0) cfg.trainer.seed = f.seed;
    if (sub->count("--output-dir") > 0) cfg.output_dir = f.output_dir;
    if (f.deterministic) cfg.deterministic = true;
    cfg.validate();
    return cfg;
}

hllm::SplitDataset load_split(const hllm::RunConfig& cfg, size_t* dropped_users = nullptr) {
    const hllm::Catalog catalog = hllm::load_items(cfg.items_path);
    const auto interactions = hllm::load_interactions(cfg.interactions_path, catalog);
    auto built = hllm::build_sequences(interactions, cfg.min_seq_len, cfg.max_seq_len);
    if (dropped_users != nullptr) *dropped_users = built.dropped_users;
    return hllm::leave_one_out_split(built.sequences, catalog);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw hllm::IoError("cannot write file: " + path);
    out << text;
    out.flush();
    if (!out) throw hllm::IoError("write failed: " + path);
}

std::string resolved_checkpoint_path(const hllm::RunConfig& cfg) {
    if (!cfg.checkpoint_path.empty()) return cfg.checkpoint_path;
    return (std::filesystem::path(cfg.output_dir) / "model.ckpt").string();
}

int cmd_split(const CLI::App* sub, const CliFlags& f) {
    const hllm::RunConfig cfg = resolve_config(sub, f);
    size_t dropped = 0;
    const hllm::SplitDataset split = load_split(cfg, &dropped);
    std::filesystem::create_directories(cfg.output_dir);
    const std::string path =
        (std::filesystem::path(cfg.output_dir) / "split_manifest.json").string();
    write_text_file(path, hllm::split_manifest_json(split, dropped));
    std::cout << "wrote " << path << " (" << split.train.size() << " users, "
              << split.catalog.size() << " items, " << dropped << " users dropped)\n";
    return 0;
}

int cmd_train(const CLI::App* sub, const CliFlags& f) {
    const hllm::RunConfig cfg = resolve_config(sub, f);
    const hllm::SplitDataset split = load_split(cfg);

    hllm::Recommender model;
    model.cfg = cfg.model;
    model.init(split.catalog, cfg.trainer.mode, cfg.trainer.seed);
    if (!cfg.init_checkpoint.empty()) {
        hllm::load_checkpoint_params(model, cfg.init_checkpoint);
    }

    std::filesystem::create_directories(cfg.output_dir);
    const std::string log_path =
        (std::filesystem::path(cfg.output_dir) / "loss_log.tsv").string();
    std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
    if (!log) throw hllm::IoError("cannot write file: " + log_path);

    // The log streams one line per step so an aborted run still leaves a
    // usable record behind.
    hllm::LossReporter reporter = [&log, &log_path](const hllm::LossRecord& rec) {
        log << hllm::format_loss_record(rec) << '\n';
        log.flush();
        if (!log) throw hllm::IoError("write failed: " + log_path);
    };

    const hllm::TrainResult result = hllm::train(split, model, cfg.trainer, reporter);

    const std::string ckpt_path = resolved_checkpoint_path(cfg);
    hllm::save_checkpoint(model, cfg, ckpt_path);

    std::cout << "trained " << result.history.size() << " steps";
    if (!result.history.empty()) {
        std::cout << ", final loss " << result.history.back().loss;
    }
    std::cout << "\nwrote " << log_path << "\nwrote " << ckpt_path << "\n";
    return 0;
}

int cmd_export_embeddings(const CLI::App* sub, const CliFlags& f) {
    const hllm::RunConfig cfg = resolve_config(sub, f);
    const std::string ckpt_path = resolved_checkpoint_path(cfg);
    const hllm::RunConfig trained = hllm::load_checkpoint_config(ckpt_path);

    const hllm::Catalog catalog = hllm::load_items(cfg.items_path);
    hllm::Recommender model;
    model.cfg = trained.model;
    model.init(catalog, trained.trainer.mode, trained.trainer.seed);
    hllm::load_checkpoint_params(model, ckpt_path);

    std::map<std::string, std::vector<double>> embeddings;
    if (trained.model.item_source == hllm::ItemSource::text) {
        embeddings = hllm::encode_catalog(catalog, model.item_enc, trained.model.attributes,
                                          trained.model.prompt, trained.model.max_text_len, 32);
    } else {
        embeddings = model.catalog_vectors();
    }

    std::string out_path = cfg.embeddings_path;
    if (out_path.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        out_path = (std::filesystem::path(cfg.output_dir) / "items.emb").string();
    } else if (const auto parent = std::filesystem::path(out_path).parent_path();
               !parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    hllm::export_embeddings(embeddings, out_path);
    std::cout << "wrote " << out_path << " (" << embeddings.size() << " items, dim "
              << model.cfg.d_item << ")\n";
    return 0;
}

int cmd_eval(const CLI::App* sub, const CliFlags& f) {
    const hllm::RunConfig cfg = resolve_config(sub, f);
    const std::string ckpt_path = resolved_checkpoint_path(cfg);

    // Model shape and objective come from the checkpoint; data paths and
    // evaluation settings come from the current config.
    const hllm::RunConfig trained = hllm::load_checkpoint_config(ckpt_path);
    const hllm::SplitDataset split = load_split(cfg);

    hllm::Recommender model;
    model.cfg = trained.model;
    model.init(split.catalog, trained.trainer.mode, trained.trainer.seed);
    hllm::load_checkpoint_params(model, ckpt_path);

    if (cfg.eval_from_store) {
        if (cfg.embeddings_path.empty()) {
            throw hllm::ConfigError("eval_from_store requires embeddings_path");
        }
        const hllm::EmbeddingStore store = hllm::load_embeddings(cfg.embeddings_path);
        model.set_frozen_vectors(store.to_map());
    }

    hllm::EvalConfig ec;
    ec.ks = cfg.eval_ks;
    ec.exclude_history = cfg.exclude_history;
    ec.split_part = cfg.eval_split;
    ec.config_fingerprint = cfg.fingerprint();
    ec.record_duration = !cfg.deterministic;

    const hllm::MetricsReport report = hllm::evaluate(split, model, ec);
    const std::string text = report.to_json();

    std::filesystem::create_directories(cfg.output_dir);
    const std::string path =
        (std::filesystem::path(cfg.output_dir) / "metrics_report.json").string();
    write_text_file(path, text);
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential recommender built from a byte-level item encoder "
                 "and a user-history transformer"};
    app.require_subcommand(1);

    CliFlags flags;
    CLI::App* split_cmd =
        app.add_subcommand("split", "Load the corpus and write the per-user split manifest");
    CLI::App* train_cmd =
        app.add_subcommand("train", "Train a model, writing a loss log and a checkpoint");
    CLI::App* export_cmd = app.add_subcommand(
        "export-embeddings", "Embed every catalog item with a trained checkpoint");
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "Rank the full catalog per held-out user and report metrics");
    for (CLI::App* sub : {split_cmd, train_cmd, export_cmd, eval_cmd}) {
        add_common_options(sub, &flags);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (split_cmd->parsed()) return cmd_split(split_cmd, flags);
        if (train_cmd->parsed()) return cmd_train(train_cmd, flags);
        if (export_cmd->parsed()) return cmd_export_embeddings(export_cmd, flags);
        return cmd_eval(eval_cmd, flags);
    } catch (const hllm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const hllm::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const hllm::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 1;
    } catch (const hllm::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
