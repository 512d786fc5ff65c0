#include "vulnsev/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "vulnsev/digest.hpp"
#include "vulnsev/error.hpp"
#include "vulnsev/ingest.hpp"

namespace vulnsev {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kManifestFormat = "vulnsev-snapshot/1";
constexpr std::array<SplitFile, 3> kFiles = {SplitFile::train, SplitFile::test, SplitFile::unlabeled};

Json score_json(const std::optional<Score>& s) { return s ? Json(s->value()) : Json(nullptr); }

std::optional<Score> score_from(const Json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) throw LoadError(std::string(key) + " is not a number");
    try {
        return Score::from_decimal(v.get<double>());
    } catch (const DomainError& ex) {
        throw LoadError(std::string(key) + ": " + ex.what());
    }
}

void keep_max(std::optional<Score>& slot, Score s) {
    if (!slot || s > *slot) slot = s;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed on " + p.string());
}

std::string content_digest_of(const fs::path& dir) {
    Sha256 h;
    for (auto f : kFiles) h.update(read_file(dir / file_name(f)));
    return to_hex(h.finish());
}

std::string fraction(std::size_t part, std::size_t whole) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole));
    return buf;
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

std::string lpad(std::string s, std::size_t width) {
    if (s.size() < width) s.insert(0, width - s.size(), ' ');
    return s;
}

}  // namespace

std::string_view to_string(Split s) noexcept { return s == Split::train ? "train" : "test"; }

std::string_view to_string(SplitFile f) noexcept {
    switch (f) {
    case SplitFile::train: return "train";
    case SplitFile::test: return "test";
    case SplitFile::unlabeled: return "unlabeled";
    }
    return "?";
}

SplitFile parse_split_file(std::string_view name) {
    for (auto f : kFiles)
        if (to_string(f) == name) return f;
    throw ConfigError("unknown split '" + std::string(name) + "' (expected train, test or unlabeled)");
}

std::string file_name(SplitFile f) { return std::string(to_string(f)) + ".jsonl"; }

Split split_for_id(std::string_view id, double ratio) {
    const auto threshold = static_cast<std::uint64_t>(std::llround(ratio * 10000.0));
    return fnv1a64(id) % 10000 < threshold ? Split::train : Split::test;
}

std::vector<CvssEntry> DatasetRow::score_entries() const {
    std::vector<CvssEntry> out;
    if (cvss_v2) out.push_back({CvssVersion::v2, *cvss_v2, std::nullopt});
    if (cvss_v3_0) out.push_back({CvssVersion::v3_0, *cvss_v3_0, std::nullopt});
    if (cvss_v3_1) out.push_back({CvssVersion::v3_1, *cvss_v3_1, std::nullopt});
    if (cvss_v4_0) out.push_back({CvssVersion::v4_0, *cvss_v4_0, std::nullopt});
    return out;
}

Json to_json(const DatasetRow& row) {
    Json j;
    j["id"] = row.id;
    j["title"] = row.title ? Json(*row.title) : Json(nullptr);
    j["description"] = row.description;
    j["cpes"] = row.cpes;
    j["cvss_v2"] = score_json(row.cvss_v2);
    j["cvss_v3_0"] = score_json(row.cvss_v3_0);
    j["cvss_v3_1"] = score_json(row.cvss_v3_1);
    j["cvss_v4_0"] = score_json(row.cvss_v4_0);
    j["label"] = row.label ? Json(std::string(to_string(*row.label))) : Json(nullptr);
    j["split"] = std::string(to_string(row.split));
    return j;
}

DatasetRow row_from_json(const Json& j) {
    static const std::set<std::string> kKeys = {"id",       "title",     "description", "cpes",  "cvss_v2",
                                                "cvss_v3_0", "cvss_v3_1", "cvss_v4_0",   "label", "split"};
    if (!j.is_object()) throw LoadError("row is not a JSON object");
    for (const auto& [k, v] : j.items())
        if (!kKeys.count(k)) throw LoadError("unexpected field '" + k + "'");
    try {
        DatasetRow row;
        row.id = j.at("id").get<std::string>();
        if (row.id.empty()) throw LoadError("empty id");
        if (!j.at("title").is_null()) row.title = j.at("title").get<std::string>();
        row.description = j.at("description").get<std::string>();
        row.cpes = j.at("cpes").get<std::vector<std::string>>();
        row.cvss_v2 = score_from(j, "cvss_v2");
        row.cvss_v3_0 = score_from(j, "cvss_v3_0");
        row.cvss_v3_1 = score_from(j, "cvss_v3_1");
        row.cvss_v4_0 = score_from(j, "cvss_v4_0");
        if (!j.at("label").is_null()) row.label = parse_severity(j.at("label").get<std::string>());
        const auto split = j.at("split").get<std::string>();
        if (split == "train") row.split = Split::train;
        else if (split == "test") row.split = Split::test;
        else throw LoadError("unknown split '" + split + "'");
        return row;
    } catch (const nlohmann::json::exception& ex) {
        throw LoadError(ex.what());
    } catch (const DomainError& ex) {
        throw LoadError(ex.what());
    }
}

void BuildOptions::validate() const {
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        throw ConfigError("split_ratio must lie in (0, 1), got " + std::to_string(split_ratio));
}

DatasetRow make_row(const AdvisoryRecord& record, const LabelingPolicy& policy, const BuildOptions& options) {
    DatasetRow row;
    row.id = record.id;
    row.title = record.title;
    row.description = record.description;
    row.cpes = record.cpes;
    for (const auto& e : record.scores) {
        switch (e.version) {
        case CvssVersion::v2: keep_max(row.cvss_v2, e.base_score); break;
        case CvssVersion::v3_0: keep_max(row.cvss_v3_0, e.base_score); break;
        case CvssVersion::v3_1: keep_max(row.cvss_v3_1, e.base_score); break;
        case CvssVersion::v4_0: keep_max(row.cvss_v4_0, e.base_score); break;
        }
    }
    if (normalize_whitespace(row.description).size() >= options.min_description_chars)
        if (auto l = label_record(record, policy)) row.label = l->label;
    row.split = split_for_id(row.id, options.split_ratio);
    return row;
}

Json to_json(const SnapshotManifest& m) {
    Json j;
    j["format"] = std::string(kManifestFormat);
    j["created_at"] = format_timestamp(m.created_at);
    j["policy"] = to_json(m.policy);
    j["split_ratio"] = m.split_ratio;
    j["split_hash"] = "fnv1a64(id) mod 10000";
    j["min_description_chars"] = m.min_description_chars;
    j["total"] = m.total;
    j["labeled"] = m.labeled;
    j["unlabeled"] = m.unlabeled;
    j["train"] = m.train;
    j["test"] = m.test;
    Json per_label;
    for (auto s : kAllSeverities) per_label[std::string(to_string(s))] = m.per_label_counts[rank(s)];
    j["per_label_counts"] = std::move(per_label);
    j["digest_algorithm"] = "sha256";
    j["content_digest"] = m.content_digest;
    j["manifest_digest"] = sha256_hex(j.dump());
    return j;
}

SnapshotManifest manifest_from_json(const Json& j) {
    try {
        if (j.at("format").get<std::string>() != kManifestFormat)
            throw LoadError("unsupported manifest format '" + j.at("format").get<std::string>() + "'");
        Json body = j;
        const auto recorded = body.at("manifest_digest").get<std::string>();
        body.erase("manifest_digest");
        if (sha256_hex(body.dump()) != recorded) throw IntegrityError("manifest.json was modified after it was written");

        SnapshotManifest m;
        m.created_at = parse_timestamp(j.at("created_at").get<std::string>());
        m.policy = policy_from_json(j.at("policy"));
        m.split_ratio = j.at("split_ratio").get<double>();
        m.min_description_chars = j.at("min_description_chars").get<std::size_t>();
        m.total = j.at("total").get<std::size_t>();
        m.labeled = j.at("labeled").get<std::size_t>();
        m.unlabeled = j.at("unlabeled").get<std::size_t>();
        m.train = j.at("train").get<std::size_t>();
        m.test = j.at("test").get<std::size_t>();
        for (auto s : kAllSeverities)
            m.per_label_counts[rank(s)] = j.at("per_label_counts").at(std::string(to_string(s))).get<std::size_t>();
        m.content_digest = j.at("content_digest").get<std::string>();
        if (m.total != m.labeled + m.unlabeled || m.labeled != m.train + m.test)
            throw IntegrityError("manifest counts are inconsistent");
        return m;
    } catch (const nlohmann::json::exception& ex) {
        throw LoadError(std::string("malformed manifest: ") + ex.what());
    } catch (const ParseError& ex) {
        throw LoadError(std::string("malformed manifest: ") + ex.what());
    } catch (const ConfigError& ex) {
        throw LoadError(std::string("malformed manifest: ") + ex.what());
    }
}

SnapshotManifest build_snapshot(const KvStore& store, const LabelingPolicy& policy, const BuildOptions& options,
                                const fs::path& out_dir) {
    policy.validate();
    options.validate();

    SnapshotManifest m;
    m.created_at = options.created_at.value_or(now_utc());
    m.policy = policy;
    m.split_ratio = options.split_ratio;
    m.min_description_chars = options.min_description_chars;

    std::string files[3];
    for_each_record(store, [&](const AdvisoryRecord& rec) {
        const DatasetRow row = make_row(rec, policy, options);
        ++m.total;
        SplitFile target = SplitFile::unlabeled;
        if (row.label) {
            ++m.labeled;
            ++m.per_label_counts[rank(*row.label)];
            if (row.split == Split::train) {
                ++m.train;
                target = SplitFile::train;
            } else {
                ++m.test;
                target = SplitFile::test;
            }
        } else {
            ++m.unlabeled;
        }
        files[static_cast<int>(target)] += to_json(row).dump() + "\n";
    });
    if (m.total == 0) throw PreconditionError("record store is empty; run sync first");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    Sha256 h;
    for (auto f : kFiles) {
        const auto& bytes = files[static_cast<int>(f)];
        write_file(out_dir / file_name(f), bytes);
        h.update(bytes);
    }
    m.content_digest = to_hex(h.finish());
    write_file(out_dir / "manifest.json", to_json(m).dump(2) + "\n");
    return m;
}

SnapshotManifest load_manifest(const fs::path& dir) {
    Json j;
    try {
        j = Json::parse(read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& ex) {
        throw LoadError(std::string("manifest.json is not JSON: ") + ex.what());
    }
    SnapshotManifest m = manifest_from_json(j);
    if (content_digest_of(dir) != m.content_digest)
        throw IntegrityError(dir.string() + ": row files do not match the manifest content digest");
    return m;
}

std::vector<DatasetRow> load_split(const fs::path& dir, SplitFile which) {
    const SnapshotManifest m = load_manifest(dir);
    const std::string bytes = read_file(dir / file_name(which));

    std::vector<DatasetRow> rows;
    std::istringstream in(bytes);
    std::string line;
    std::size_t line_no = 0;
    std::array<std::size_t, kNumSeverities> per_label{};
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = file_name(which) + ":" + std::to_string(line_no) + ": ";
        DatasetRow row;
        try {
            row = row_from_json(Json::parse(line));
        } catch (const nlohmann::json::exception& ex) {
            throw LoadError(where + ex.what());
        } catch (const LoadError& ex) {
            throw LoadError(where + ex.what());
        }
        if (row.label && !row.has_score()) throw LoadError(where + "row '" + row.id + "' has a label but no score field");
        if (row.split != split_for_id(row.id, m.split_ratio))
            throw LoadError(where + "row '" + row.id + "' carries the wrong split");
        if (!rows.empty() && !(rows.back().id < row.id))
            throw LoadError(where + "rows are not in strictly ascending id order");

        if (which == SplitFile::unlabeled) {
            if (row.label) throw LoadError(where + "unlabeled row '" + row.id + "' has a label");
        } else {
            if (!row.label) throw LoadError(where + "row '" + row.id + "' has no label");
            if ((which == SplitFile::train) != (row.split == Split::train))
                throw LoadError(where + "row '" + row.id + "' is in the wrong file");
            const auto entry = select_score(row.score_entries(), m.policy);
            const auto expected = entry ? label_from_score(entry->base_score, m.policy) : std::nullopt;
            if (expected != row.label) throw LoadError(where + "label of '" + row.id + "' does not follow the policy");
            if (normalize_whitespace(row.description).size() < m.min_description_chars)
                throw LoadError(where + "row '" + row.id + "' is labeled but its description is too short");
            ++per_label[rank(*row.label)];
        }
        rows.push_back(std::move(row));
    }

    const std::size_t expected_count =
        which == SplitFile::train ? m.train : which == SplitFile::test ? m.test : m.unlabeled;
    if (rows.size() != expected_count)
        throw IntegrityError(file_name(which) + " holds " + std::to_string(rows.size()) + " rows, manifest says " +
                             std::to_string(expected_count));
    return rows;
}

std::string snapshot_stats(const SnapshotManifest& m) {
    std::ostringstream out;
    out << "snapshot created " << format_timestamp(m.created_at) << "\n";
    out << "  total      " << lpad(std::to_string(m.total), 8) << "\n";
    out << "  labeled    " << lpad(std::to_string(m.labeled), 8) << "  (" << fraction(m.labeled, m.total) << ")\n";
    out << "  unlabeled  " << lpad(std::to_string(m.unlabeled), 8) << "  (" << fraction(m.unlabeled, m.total) << ")\n";
    out << "  train      " << lpad(std::to_string(m.train), 8) << "\n";
    out << "  test       " << lpad(std::to_string(m.test), 8) << "\n";
    if (m.labeled == 0) {
        out << "no labeled rows\n";
        return out.str();
    }
    out << "label distribution:\n";
    for (auto s : kAllSeverities) {
        const auto n = m.per_label_counts[rank(s)];
        out << "  " << pad(std::string(to_string(s)), 9) << lpad(std::to_string(n), 8) << "  " << fraction(n, m.labeled)
            << "\n";
    }
    out << "content digest " << m.content_digest << "\n";
    return out.str();
}

std::string snapshot_dir_name(Timestamp t) { return "snapshot-" + format_date_compact(t); }

std::optional<fs::path> latest_snapshot(const fs::path& root) {
    std::error_code ec;
    std::optional<fs::path> best;
    for (const auto& entry : fs::directory_iterator(root, ec)) {
        const auto name = entry.path().filename().string();
        if (!entry.is_directory() || name.rfind("snapshot-", 0) != 0) continue;
        if (!best || name > best->filename().string()) best = entry.path();
    }
    return best;
}

}  // namespace vulnsev
