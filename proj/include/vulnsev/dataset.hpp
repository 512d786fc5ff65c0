#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vulnsev/kv_store.hpp"
#include "vulnsev/record.hpp"

namespace vulnsev {

enum class Split : std::uint8_t { train, test };
enum class SplitFile : std::uint8_t { train, test, unlabeled };

std::string_view to_string(Split s) noexcept;
std::string_view to_string(SplitFile f) noexcept;
SplitFile parse_split_file(std::string_view name);
// "train.jsonl", "test.jsonl", "unlabeled.jsonl"
std::string file_name(SplitFile f);

// train iff fnv1a64(id) % 10000 < round(ratio * 10000). Depends on nothing
// but the id, so a record never changes sides as the corpus grows.
Split split_for_id(std::string_view id, double ratio);

struct DatasetRow {
    std::string id;
    std::optional<std::string> title;
    std::string description;
    std::vector<std::string> cpes;
    std::optional<Score> cvss_v2;
    std::optional<Score> cvss_v3_0;
    std::optional<Score> cvss_v3_1;
    std::optional<Score> cvss_v4_0;
    std::optional<Severity> label;
    // Present on unlabeled rows too: the side the row will land on once scored.
    Split split = Split::train;

    bool has_score() const noexcept { return cvss_v2 || cvss_v3_0 || cvss_v3_1 || cvss_v4_0; }
    std::vector<CvssEntry> score_entries() const;

    friend bool operator==(const DatasetRow&, const DatasetRow&) = default;
};

// Keys in the fixed order id, title, description, cpes, cvss_v2, cvss_v3_0,
// cvss_v3_1, cvss_v4_0, label, split.
Json to_json(const DatasetRow& row);
// Shape check only; throws LoadError.
DatasetRow row_from_json(const Json& j);

struct BuildOptions {
    double split_ratio = 0.9;
    // Shorter descriptions go to unlabeled whatever their score.
    std::size_t min_description_chars = 10;
    // Defaults to the wall clock; fix it for reproducible manifests.
    std::optional<Timestamp> created_at;

    void validate() const;
};

DatasetRow make_row(const AdvisoryRecord& record, const LabelingPolicy& policy, const BuildOptions& options);

struct SnapshotManifest {
    Timestamp created_at{};
    LabelingPolicy policy;
    double split_ratio = 0.9;
    std::size_t min_description_chars = 10;
    std::size_t total = 0;
    std::size_t labeled = 0;
    std::size_t unlabeled = 0;
    std::size_t train = 0;
    std::size_t test = 0;
    std::array<std::size_t, kNumSeverities> per_label_counts{};
    // sha256 over train.jsonl ++ test.jsonl ++ unlabeled.jsonl.
    std::string content_digest;

    friend bool operator==(const SnapshotManifest&, const SnapshotManifest&) = default;
};

// Includes a trailing manifest_digest (sha256 of the object without it).
Json to_json(const SnapshotManifest& m);
SnapshotManifest manifest_from_json(const Json& j);

// Writes train.jsonl, test.jsonl, unlabeled.jsonl and manifest.json into
// out_dir (created if missing). Rows are ordered by id. An empty store is a
// PreconditionError.
SnapshotManifest build_snapshot(const KvStore& store, const LabelingPolicy& policy, const BuildOptions& options,
                                const std::filesystem::path& out_dir);

// Reads manifest.json and checks its own digest plus the content digest of
// the row files (IntegrityError on mismatch).
SnapshotManifest load_manifest(const std::filesystem::path& dir);

// Rows of one file with every invariant re-checked against the manifest.
std::vector<DatasetRow> load_split(const std::filesystem::path& dir, SplitFile which);

std::string snapshot_stats(const SnapshotManifest& manifest);

// "snapshot-20240501"
std::string snapshot_dir_name(Timestamp t);
// Newest snapshot-* directory under root, by name.
std::optional<std::filesystem::path> latest_snapshot(const std::filesystem::path& root);

}  // namespace vulnsev
