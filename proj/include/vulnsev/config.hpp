#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vulnsev/classifier.hpp"
#include "vulnsev/dataset.hpp"
#include "vulnsev/gateway.hpp"
#include "vulnsev/gateway_server.hpp"
#include "vulnsev/ingest.hpp"
#include "vulnsev/trainer.hpp"

namespace vulnsev {

inline constexpr const char* kBindEnvVar = "VULNSEV_BIND";

// One file, one section per stage. Relative paths resolve against the
// directory holding the config file.
struct PipelineConfig {
    std::filesystem::path source;  // the file this came from
    std::vector<FeedConfig> feeds;
    std::filesystem::path store_path;
    std::filesystem::path snapshot_dir;
    std::filesystem::path model_path;
    LabelingPolicy labeling;
    BuildOptions dataset;
    TrainConfig train;
    FeatureSpace features;
    TokenizerConfig tokenizer;
    BindAddress bind;
    std::vector<BackendSpec> backends;

    void validate() const;
};

// Throws ConfigError. The bind address env var, when set, wins over the file.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const Json& j, const std::filesystem::path& base_dir);

}  // namespace vulnsev
