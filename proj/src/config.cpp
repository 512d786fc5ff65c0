#include "vulnsev/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "vulnsev/error.hpp"

namespace vulnsev {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(section) + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw ConfigError(std::string(section) + ": unknown key '" + key + "'");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) throw ConfigError("empty path in config");
    fs::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal();
}

// Local feed URIs resolve like paths; URLs stay as written.
std::string resolve_uri(const fs::path& base, const std::string& uri) {
    if (uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0 || uri.rfind("file://", 0) == 0) return uri;
    return resolve(base, uri).string();
}

template <class T>
void read(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void PipelineConfig::validate() const {
    std::set<std::string> names;
    for (const auto& f : feeds) {
        f.validate();
        if (!names.insert(f.name).second) throw ConfigError("feeds: name '" + f.name + "' is used twice");
    }
    labeling.validate();
    dataset.validate();
    train.validate();
    features.validate();
    tokenizer.validate();
}

PipelineConfig config_from_json(const Json& j, const fs::path& base_dir) {
    PipelineConfig cfg;
    try {
        check_keys(j, "config", {"feeds", "store_path", "snapshot_dir", "model_path", "labeling", "dataset", "train",
                                 "features", "tokenizer", "gateway"});
        if (j.contains("feeds")) {
            for (const auto& f : j.at("feeds")) {
                check_keys(f, "feeds[]", {"name", "kind", "uri", "enabled"});
                FeedConfig feed;
                feed.name = f.at("name").get<std::string>();
                feed.kind = parse_source_kind(f.at("kind").get<std::string>());
                feed.uri = resolve_uri(base_dir, f.at("uri").get<std::string>());
                read(f, "enabled", feed.enabled);
                cfg.feeds.push_back(std::move(feed));
            }
        }
        cfg.store_path = resolve(base_dir, j.value("store_path", std::string("data/store.kvlog")));
        cfg.snapshot_dir = resolve(base_dir, j.value("snapshot_dir", std::string("data/snapshots")));
        cfg.model_path = resolve(base_dir, j.value("model_path", std::string("data/models/baseline.vsm")));
        if (j.contains("labeling")) {
            check_keys(j.at("labeling"), "labeling", {"version_precedence", "band_starts", "zero_score_rule"});
            cfg.labeling = policy_from_json(j.at("labeling"));
        }
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            check_keys(d, "dataset", {"split_ratio", "min_description_chars"});
            read(d, "split_ratio", cfg.dataset.split_ratio);
            read(d, "min_description_chars", cfg.dataset.min_description_chars);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            check_keys(t, "train", {"learning_rate", "batch_size", "epochs", "weight_decay", "warmup_fraction",
                                    "adam_beta1", "adam_beta2", "adam_epsilon", "seed"});
            read(t, "learning_rate", cfg.train.learning_rate);
            read(t, "batch_size", cfg.train.batch_size);
            read(t, "epochs", cfg.train.epochs);
            read(t, "weight_decay", cfg.train.weight_decay);
            read(t, "warmup_fraction", cfg.train.warmup_fraction);
            read(t, "adam_beta1", cfg.train.adam_beta1);
            read(t, "adam_beta2", cfg.train.adam_beta2);
            read(t, "adam_epsilon", cfg.train.adam_epsilon);
            read(t, "seed", cfg.train.rng_seed);
        }
        if (j.contains("features")) {
            const auto& f = j.at("features");
            check_keys(f, "features", {"dims", "hash_seed", "tf_mode"});
            read(f, "dims", cfg.features.dims);
            read(f, "hash_seed", cfg.features.hash_seed);
            if (f.contains("tf_mode")) cfg.features.tf_mode = parse_tf_mode(f.at("tf_mode").get<std::string>());
        }
        if (j.contains("tokenizer")) {
            const auto& t = j.at("tokenizer");
            check_keys(t, "tokenizer", {"lowercase", "max_tokens"});
            read(t, "lowercase", cfg.tokenizer.lowercase);
            read(t, "max_tokens", cfg.tokenizer.max_tokens);
        }
        if (j.contains("gateway")) {
            const auto& g = j.at("gateway");
            check_keys(g, "gateway", {"bind", "backends"});
            if (g.contains("bind")) cfg.bind = parse_bind_address(g.at("bind").get<std::string>());
            if (g.contains("backends")) {
                for (const auto& b : g.at("backends")) {
                    check_keys(b, "gateway.backends[]", {"name", "kind", "artifact_path", "args"});
                    BackendSpec spec;
                    spec.name = b.at("name").get<std::string>();
                    spec.kind = parse_backend_kind(b.value("kind", std::string("native_baseline")));
                    spec.artifact_path = resolve(base_dir, b.at("artifact_path").get<std::string>());
                    read(b, "args", spec.args);
                    cfg.backends.push_back(std::move(spec));
                }
            }
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    } catch (const DomainError& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    }
    if (const char* bind = std::getenv(kBindEnvVar); bind != nullptr && *bind != '\0')
        cfg.bind = parse_bind_address(bind);
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    Json j;
    try {
        j = Json::parse(ss.str());
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(path.string() + ": " + ex.what());
    }
    const fs::path base = fs::absolute(path).parent_path();
    PipelineConfig cfg = config_from_json(j, base);
    cfg.source = fs::absolute(path);
    return cfg;
}

}  // namespace vulnsev
