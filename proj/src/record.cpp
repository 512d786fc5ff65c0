#include "vulnsev/record.hpp"

#include "vulnsev/error.hpp"

namespace vulnsev {

std::string_view to_string(SourceKind k) noexcept {
    switch (k) {
    case SourceKind::cve: return "cve";
    case SourceKind::osv: return "osv";
    case SourceKind::csaf: return "csaf";
    }
    return "?";
}

SourceKind parse_source_kind(std::string_view name) {
    if (name == "cve") return SourceKind::cve;
    if (name == "osv") return SourceKind::osv;
    if (name == "csaf") return SourceKind::csaf;
    throw ConfigError("unknown source kind '" + std::string(name) + "'");
}

void AdvisoryRecord::validate() const {
    if (id.empty()) throw DomainError("advisory record without id");
    if (description.empty()) throw DomainError("advisory record '" + id + "' has an empty description");
    if (!is_valid_utf8(id) || !is_valid_utf8(description) || (title && !is_valid_utf8(*title)))
        throw DomainError("advisory record '" + id + "' contains invalid UTF-8");
}

Json to_json(const CvssEntry& entry) {
    Json j;
    j["version"] = std::string(to_string(entry.version));
    j["base_score"] = entry.base_score.value();
    j["vector"] = entry.vector ? Json(*entry.vector) : Json(nullptr);
    return j;
}

CvssEntry cvss_entry_from_json(const Json& j) {
    try {
        CvssEntry e;
        e.version = parse_cvss_version(j.at("version").get<std::string>());
        e.base_score = Score::from_decimal(j.at("base_score").get<double>());
        if (j.contains("vector") && !j.at("vector").is_null()) e.vector = j.at("vector").get<std::string>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed score entry: ") + ex.what());
    } catch (const DomainError& ex) {
        throw ParseError(std::string("malformed score entry: ") + ex.what());
    }
}

Json canonical_json(const AdvisoryRecord& r) {
    Json j;
    j["id"] = r.id;
    j["title"] = r.title ? Json(*r.title) : Json(nullptr);
    j["description"] = r.description;
    j["cpes"] = r.cpes;
    Json scores = Json::array();
    for (const auto& s : r.scores) scores.push_back(to_json(s));
    j["scores"] = std::move(scores);
    j["source"] = std::string(to_string(r.source));
    return j;
}

Json storage_json(const AdvisoryRecord& r) {
    Json j = canonical_json(r);
    j["fetched_at"] = format_timestamp(r.fetched_at);
    return j;
}

AdvisoryRecord record_from_json(const Json& j) {
    try {
        AdvisoryRecord r;
        r.id = j.at("id").get<std::string>();
        if (j.contains("title") && !j.at("title").is_null()) r.title = j.at("title").get<std::string>();
        r.description = j.at("description").get<std::string>();
        r.cpes = j.at("cpes").get<std::vector<std::string>>();
        for (const auto& s : j.at("scores")) r.scores.push_back(cvss_entry_from_json(s));
        r.source = parse_source_kind(j.at("source").get<std::string>());
        if (j.contains("fetched_at")) r.fetched_at = parse_timestamp(j.at("fetched_at").get<std::string>());
        r.validate();
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed advisory record: ") + ex.what());
    } catch (const ConfigError& ex) {
        throw ParseError(std::string("malformed advisory record: ") + ex.what());
    } catch (const DomainError& ex) {
        throw ParseError(std::string("malformed advisory record: ") + ex.what());
    }
}

Json to_json(const LabelingPolicy& policy) {
    Json j;
    Json versions = Json::array();
    for (auto v : policy.version_precedence) versions.push_back(std::string(to_string(v)));
    j["version_precedence"] = std::move(versions);
    Json edges = Json::array();
    for (int t : policy.band_starts) edges.push_back(t / 10.0);
    j["band_starts"] = std::move(edges);
    j["zero_score_rule"] = std::string(to_string(policy.zero_score_rule));
    return j;
}

LabelingPolicy policy_from_json(const Json& j) {
    LabelingPolicy p;
    try {
        if (j.contains("version_precedence")) {
            p.version_precedence.clear();
            for (const auto& v : j.at("version_precedence")) p.version_precedence.push_back(parse_cvss_version(v.get<std::string>()));
        }
        if (j.contains("band_starts")) {
            const auto& edges = j.at("band_starts");
            if (!edges.is_array() || edges.size() != 3)
                throw ConfigError("labeling: band_starts needs exactly three values (medium, high, critical)");
            for (std::size_t i = 0; i < 3; ++i) p.band_starts[i] = Score::from_decimal(edges[i].get<double>()).tenths();
        }
        if (j.contains("zero_score_rule"))
            p.zero_score_rule = parse_zero_score_rule(j.at("zero_score_rule").get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("labeling: ") + ex.what());
    } catch (const DomainError& ex) {
        throw ConfigError(std::string("labeling: ") + ex.what());
    }
    p.validate();
    return p;
}

std::optional<CvssEntry> select_score(const std::vector<CvssEntry>& scores,
                                      const LabelingPolicy& policy) {
    for (CvssVersion v : policy.version_precedence) {
        const CvssEntry* best = nullptr;
        for (const auto& e : scores) {
            if (e.version != v) continue;
            // Ties on score are broken by vector text so the choice never
            // depends on list order.
            if (best == nullptr || e.base_score > best->base_score ||
                (e.base_score == best->base_score && e.vector.value_or("") > best->vector.value_or("")))
                best = &e;
        }
        if (best != nullptr) return *best;
    }
    return std::nullopt;
}

std::optional<RecordLabel> label_record(const AdvisoryRecord& record, const LabelingPolicy& policy) {
    auto entry = select_score(record.scores, policy);
    if (!entry) return std::nullopt;
    auto label = label_from_score(entry->base_score, policy);
    if (!label) return std::nullopt;
    return RecordLabel{*label, *entry};
}

}  // namespace vulnsev
