// vulnsev: sync feeds, build snapshots, train, serve and evaluate.

#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "vulnsev/config.hpp"
#include "vulnsev/dataset.hpp"
#include "vulnsev/error.hpp"
#include "vulnsev/evalkit.hpp"
#include "vulnsev/gateway.hpp"
#include "vulnsev/gateway_server.hpp"
#include "vulnsev/ingest.hpp"
#include "vulnsev/kv_store.hpp"
#include "vulnsev/model_io.hpp"
#include "vulnsev/trainer.hpp"

namespace fs = std::filesystem;
using namespace vulnsev;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Options {
    std::string config = "vulnsev.json";

    std::string feed;
    bool json = false;

    std::string created_at;
    std::string snapshot;
    std::string earlier;
    std::string model;
    std::optional<std::uint32_t> epochs;
    std::optional<std::uint64_t> seed;

    std::string bind;
    std::string predictions;
    std::string output;
    std::string text;
};

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

fs::path resolve_snapshot(const PipelineConfig& cfg, const std::string& flag) {
    if (!flag.empty()) return flag;
    auto latest = latest_snapshot(cfg.snapshot_dir);
    if (!latest) throw PreconditionError("no snapshot under " + cfg.snapshot_dir.string() + "; run 'vulnsev build' first");
    return *latest;
}

int cmd_sync(const PipelineConfig& cfg, const Options& opt) {
    std::vector<const FeedConfig*> selected;
    for (const auto& f : cfg.feeds) {
        if (!opt.feed.empty() ? f.name == opt.feed : f.enabled) selected.push_back(&f);
    }
    if (!opt.feed.empty() && selected.empty()) {
        std::cerr << "error: no feed named '" << opt.feed << "' in " << cfg.source.string() << "\n";
        return kExitUsage;
    }
    if (selected.empty()) {
        std::cerr << "error: no enabled feeds in " << cfg.source.string() << "\n";
        return kExitFailure;
    }

    fs::create_directories(cfg.store_path.parent_path());
    FileKvStore store(cfg.store_path, FileKvStore::Mode::read_write);
    int rc = kExitOk;
    Json all = Json::array();
    for (const FeedConfig* feed : selected) {
        FeedConfig run = *feed;
        run.enabled = true;  // --feed may name a disabled feed on purpose
        try {
            const SyncResult r = sync(run, store);
            if (opt.json) {
                all.push_back(to_json(r));
            } else {
                std::cout << r.feed << ": fetched " << r.fetched << ", parsed " << r.parsed << ", new " << r.stored_new
                          << ", updated " << r.stored_updated << ", warnings " << r.warnings << "\n";
                for (const auto& m : r.messages) std::cout << "  " << m << "\n";
            }
        } catch (const Error& ex) {
            rc = kExitFailure;
            std::cerr << "error: " << ex.what() << "\n";
            if (opt.json) all.push_back(Json{{"feed", feed->name}, {"error", ex.what()}});
        }
    }
    store.flush();
    if (opt.json) print_json(all);
    return rc;
}

int cmd_build(const PipelineConfig& cfg, const Options& opt) {
    if (!fs::exists(cfg.store_path)) {
        std::cerr << "error: store " << cfg.store_path.string() << " does not exist; run 'vulnsev sync' first\n";
        return kExitFailure;
    }
    BuildOptions options = cfg.dataset;
    if (!opt.created_at.empty()) options.created_at = parse_timestamp(opt.created_at);
    const Timestamp created = options.created_at.value_or(now_utc());
    options.created_at = created;

    FileKvStore store(cfg.store_path, FileKvStore::Mode::read_only);
    const fs::path out = opt.output.empty() ? cfg.snapshot_dir / snapshot_dir_name(created) : fs::path(opt.output);
    SnapshotManifest m;
    try {
        m = build_snapshot(store, cfg.labeling, options, out);
    } catch (const PreconditionError& ex) {
        std::cerr << "error: " << ex.what() << "; run 'vulnsev sync' first\n";
        return kExitFailure;
    }
    if (opt.json) {
        Json j = to_json(m);
        j["path"] = out.string();
        print_json(j);
    } else {
        std::cout << "snapshot " << out.string() << "\n" << snapshot_stats(m);
    }
    return kExitOk;
}

int cmd_train(const PipelineConfig& cfg, const Options& opt) {
    const fs::path snap = resolve_snapshot(cfg, opt.snapshot);
    TrainConfig tc = cfg.train;
    if (opt.epochs) tc.epochs = *opt.epochs;
    if (opt.seed) tc.rng_seed = *opt.seed;
    tc.validate();

    const auto train_rows = load_split(snap, SplitFile::train);
    const auto test_rows = load_split(snap, SplitFile::test);
    const TrainResult result = train(train_rows, tc, cfg.features, cfg.tokenizer, &test_rows);

    const fs::path model_path = opt.model.empty() ? cfg.model_path : fs::path(opt.model);
    if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
    save_model(result.model, model_path);
    const fs::path log_path = model_path.string() + ".log.jsonl";
    {
        std::ofstream log(log_path, std::ios::trunc);
        for (const auto& e : result.log) log << to_json(e).dump() << "\n";
        if (!log) throw IoError("cannot write " + log_path.string());
    }

    std::optional<EvalReport> report;
    if (!test_rows.empty()) {
        std::vector<LabelPair> pairs;
        for (const auto& row : test_rows) pairs.push_back({*row.label, predict_text(result.model, row.description).label});
        report = evaluate(pairs);
    }
    const std::string digest = model_digest(result.model);
    if (opt.json) {
        Json j;
        j["snapshot"] = snap.string();
        j["model_path"] = model_path.string();
        j["model_digest"] = digest;
        j["epochs"] = Json::array();
        for (const auto& e : result.log) j["epochs"].push_back(to_json(e));
        j["test_report"] = report ? to_json(*report) : Json(nullptr);
        print_json(j);
    } else {
        for (const auto& e : result.log) {
            std::printf("epoch %u  loss %.6f  train_acc %.3f", e.epoch, e.loss, e.train_accuracy);
            if (e.eval_accuracy) std::printf("  test_acc %.3f", *e.eval_accuracy);
            std::printf("\n");
        }
        std::cout << "model " << model_path.string() << " sha256 " << digest << "\n";
        if (report)
            std::cout << "\n" << render_report(*report);
        else
            std::cout << "test split is empty; no evaluation\n";
    }
    return kExitOk;
}

int cmd_predict(const PipelineConfig& cfg, const Options& opt) {
    const fs::path model_path = opt.model.empty() ? cfg.model_path : fs::path(opt.model);
    const ClassifierModel model = load_model(model_path);
    if (!opt.text.empty()) {
        const Prediction p = predict_text(model, opt.text);
        Json scores;
        for (auto s : kAllSeverities) scores[std::string(to_string(s))] = p.probabilities[rank(s)];
        print_json(Json{{"label", std::string(to_string(p.label))}, {"scores", scores}});
        return kExitOk;
    }
    // Predict every unlabeled row of a snapshot and append to a predictions log.
    const fs::path snap = resolve_snapshot(cfg, opt.snapshot);
    if (opt.output.empty()) {
        std::cerr << "error: --output is required unless --text is given\n";
        return kExitUsage;
    }
    const Timestamp at = opt.created_at.empty() ? now_utc() : parse_timestamp(opt.created_at);
    std::ofstream out(opt.output, std::ios::app);
    if (!out) throw IoError("cannot write " + opt.output);
    std::size_t n = 0;
    for (const auto& row : load_split(snap, SplitFile::unlabeled)) {
        if (row.has_score()) continue;
        out << to_json(PredictionLogRow{row.id, predict_text(model, row.description).label, at}).dump() << "\n";
        ++n;
    }
    if (!out) throw IoError("cannot write " + opt.output);
    std::cout << "wrote " << n << " predictions to " << opt.output << "\n";
    return kExitOk;
}

int cmd_eval(const PipelineConfig& cfg, const Options& opt) {
    const fs::path snap = resolve_snapshot(cfg, opt.snapshot);
    std::optional<fs::path> earlier;
    if (!opt.earlier.empty()) earlier = opt.earlier;
    AgreementStudy study;
    try {
        study = agreement_study(opt.predictions, snap, cfg.labeling, earlier);
    } catch (const PreconditionError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitFailure;
    }
    if (opt.json) {
        print_json(to_json(study));
    } else {
        std::cout << "pairs " << study.pairs.size() << " of " << study.log_rows << " log rows (excluded: "
                  << study.missing_later << " missing, " << study.still_unscored << " still unscored, "
                  << study.not_before << " not before snapshot, " << study.scored_earlier << " scored earlier)\n\n"
                  << render_report(study.report);
    }
    return kExitOk;
}

int cmd_serve(PipelineConfig cfg, const Options& opt) {
    if (!opt.bind.empty()) cfg.bind = parse_bind_address(opt.bind);
    std::vector<BackendSpec> specs = cfg.backends;
    if (specs.empty()) specs.push_back(BackendSpec{"baseline", BackendKind::native_baseline, cfg.model_path, {}});

    // Signals go to a dedicated sigwait, never to a handler inside the server.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    std::shared_ptr<const Gateway> gateway;
    try {
        gateway = std::make_shared<const Gateway>(specs);
    } catch (const ConfigError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitFailure;
    }
    GatewayServer server(gateway, cfg.bind);
    server.start();
    std::cerr << "serving " << gateway->model_names().size() << " model(s) on "
              << to_string(BindAddress{server.host(), server.port()}) << "\n";
    std::cerr.flush();

    int sig = 0;
    sigwait(&set, &sig);
    std::cerr << "signal " << sig << " received, draining\n";
    server.stop();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vulnerability severity pipeline: sync, build, train, serve, eval"};
    app.require_subcommand(1);
    Options opt;
    app.add_option("-c,--config", opt.config, "Pipeline config file (JSON)")->capture_default_str();

    auto* sync_cmd = app.add_subcommand("sync", "Fetch and store advisories from the configured feeds");
    sync_cmd->add_option("--feed", opt.feed, "Only sync this feed");
    sync_cmd->add_flag("--json", opt.json, "Print SyncResults as JSON");

    auto* build_cmd = app.add_subcommand("build", "Export the store as a labeled, split snapshot");
    build_cmd->add_option("--created-at", opt.created_at, "Snapshot timestamp (RFC 3339, UTC); default now");
    build_cmd->add_option("--out", opt.output, "Output directory; default <snapshot_dir>/snapshot-YYYYMMDD");
    build_cmd->add_flag("--json", opt.json, "Print the manifest as JSON");

    auto* train_cmd = app.add_subcommand("train", "Train the baseline classifier on a snapshot");
    train_cmd->add_option("--snapshot", opt.snapshot, "Snapshot directory; default the latest one");
    train_cmd->add_option("--epochs", opt.epochs, "Override train.epochs")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", opt.seed, "Override train.seed");
    train_cmd->add_option("--model", opt.model, "Model output path; default model_path");
    train_cmd->add_flag("--json", opt.json, "Print the training summary as JSON");

    auto* serve_cmd = app.add_subcommand("serve", "Run the local inference gateway until SIGINT/SIGTERM");
    serve_cmd->add_option("--bind", opt.bind, std::string("host:port; overrides config and ") + kBindEnvVar);

    auto* eval_cmd = app.add_subcommand("eval", "Compare logged predictions with later official labels");
    eval_cmd->add_option("--predictions", opt.predictions, "Predictions log (JSONL: id, label, timestamp)")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--snapshot", opt.snapshot, "Later snapshot; default the latest one");
    eval_cmd->add_option("--earlier", opt.earlier, "Snapshot from prediction time; ids scored there are excluded")
        ->check(CLI::ExistingDirectory);
    eval_cmd->add_flag("--json", opt.json, "Print the study as JSON");

    auto* predict_cmd = app.add_subcommand("predict", "Predict one text, or log predictions for unscored rows");
    predict_cmd->add_option("--text", opt.text, "Text to classify");
    predict_cmd->add_option("--snapshot", opt.snapshot, "Snapshot whose unscored rows to predict");
    predict_cmd->add_option("--output", opt.output, "Predictions log to append to");
    predict_cmd->add_option("--at", opt.created_at, "Timestamp to record (RFC 3339, UTC); default now");
    predict_cmd->add_option("--model", opt.model, "Model file; default model_path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        const PipelineConfig cfg = load_config(opt.config);
        if (*sync_cmd) return cmd_sync(cfg, opt);
        if (*build_cmd) return cmd_build(cfg, opt);
        if (*train_cmd) return cmd_train(cfg, opt);
        if (*serve_cmd) return cmd_serve(cfg, opt);
        if (*eval_cmd) return cmd_eval(cfg, opt);
        if (*predict_cmd) return cmd_predict(cfg, opt);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
