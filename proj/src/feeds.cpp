#include "vulnsev/feeds.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <optional>

#include "vulnsev/error.hpp"

namespace vulnsev {

namespace {

// Inputs come from the network; refuse pathological nesting before handing
// bytes to the recursive-descent JSON parser.
constexpr int kMaxNesting = 128;

void check_nesting(std::string_view bytes) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (char c : bytes) {
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '[' || c == '{') {
            if (++depth > kMaxNesting) throw ParseError("JSON nesting deeper than 128 levels");
        } else if (c == ']' || c == '}') {
            --depth;
        }
    }
}

Json parse_document(const RawDocument& doc) {
    if (doc.bytes.empty()) throw ParseError(doc.origin_uri + ": empty document");
    if (!is_valid_utf8(doc.bytes)) throw ParseError(doc.origin_uri + ": document is not valid UTF-8");
    check_nesting(doc.bytes);
    try {
        return Json::parse(doc.bytes);
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(doc.origin_uri + ": " + ex.what());
    }
}

const Json* member(const Json& obj, std::string_view key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(std::string(key));
    return it == obj.end() ? nullptr : &*it;
}

const Json* array_member(const Json& obj, std::string_view key) {
    const Json* m = member(obj, key);
    return (m != nullptr && m->is_array()) ? m : nullptr;
}

std::optional<std::string> string_member(const Json& obj, std::string_view key) {
    const Json* m = member(obj, key);
    if (m == nullptr || !m->is_string()) return std::nullopt;
    return m->get<std::string>();
}

// String after whitespace normalization, or nullopt when absent or blank.
std::optional<std::string> text_member(const Json& obj, std::string_view key) {
    auto s = string_member(obj, key);
    if (!s) return std::nullopt;
    auto norm = normalize_whitespace(*s);
    if (norm.empty()) return std::nullopt;
    return norm;
}

std::optional<double> parse_number_text(std::string_view s) {
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> number_member(const Json& obj, std::string_view key) {
    const Json* m = member(obj, key);
    if (m == nullptr) return std::nullopt;
    if (m->is_number()) return m->get<double>();
    if (m->is_string()) return parse_number_text(m->get_ref<const std::string&>());
    return std::nullopt;
}

void push_unique(std::vector<std::string>& out, const std::string& value) {
    if (std::find(out.begin(), out.end(), value) == out.end()) out.push_back(value);
}

void push_unique(std::vector<CvssEntry>& out, CvssEntry entry) {
    if (std::find(out.begin(), out.end(), entry) == out.end()) out.push_back(std::move(entry));
}

bool is_english(std::string_view lang) {
    if (lang.size() < 2) return false;
    const auto lower = [](char c) { return static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c); };
    if (lower(lang[0]) != 'e' || lower(lang[1]) != 'n') return false;
    return lang.size() == 2 || lang[2] == '-' || lang[2] == '_';
}

std::optional<CvssVersion> version_from_vector(std::string_view vector) {
    if (vector.rfind("CVSS:3.1/", 0) == 0) return CvssVersion::v3_1;
    if (vector.rfind("CVSS:3.0/", 0) == 0) return CvssVersion::v3_0;
    if (vector.rfind("CVSS:4.0/", 0) == 0) return CvssVersion::v4_0;
    // v2 vectors carry no prefix and start with the access-vector metric.
    if (vector.rfind("AV:", 0) == 0) return CvssVersion::v2;
    return std::nullopt;
}

// Wraps per-entry extraction so a type surprise deep inside one entry costs
// that entry only.
template <typename Fn>
void guarded_entry(ParseReport& report, const std::string& path, Fn&& fn) {
    try {
        if (auto rec = fn()) {
            rec->validate();
            report.records.push_back(std::move(*rec));
            return;
        }
    } catch (const nlohmann::json::exception& ex) {
        report.warnings.push_back({path, std::string("unexpected JSON shape: ") + ex.what()});
    } catch (const DomainError& ex) {
        report.warnings.push_back({path, ex.what()});
    }
    ++report.skipped;
}

// --- CVE JSON 5.x ------------------------------------------------------------

void collect_cve_metrics(const Json& container, const std::string& path, ParseReport& report,
                         std::vector<CvssEntry>& out) {
    const Json* metrics = array_member(container, "metrics");
    if (metrics == nullptr) return;
    static constexpr std::pair<std::string_view, CvssVersion> kKeys[] = {
        {"cvssV4_0", CvssVersion::v4_0},
        {"cvssV3_1", CvssVersion::v3_1},
        {"cvssV3_0", CvssVersion::v3_0},
        {"cvssV2_0", CvssVersion::v2},
    };
    for (std::size_t i = 0; i < metrics->size(); ++i) {
        const Json& m = (*metrics)[i];
        for (const auto& [key, version] : kKeys) {
            const Json* block = member(m, key);
            if (block == nullptr) continue;
            const std::string where = path + "/metrics/" + std::to_string(i) + "/" + std::string(key);
            auto score = number_member(*block, "baseScore");
            if (!score) {
                report.warnings.push_back({where, "metric without numeric baseScore dropped"});
                continue;
            }
            try {
                push_unique(out, CvssEntry{version, Score::from_decimal(*score),
                                           string_member(*block, "vectorString")});
            } catch (const DomainError& ex) {
                report.warnings.push_back({where, ex.what()});
            }
        }
    }
}

void collect_cve_cpes(const Json& container, std::vector<std::string>& out) {
    const Json* affected = array_member(container, "affected");
    if (affected == nullptr) return;
    for (const Json& a : *affected) {
        const Json* cpes = array_member(a, "cpes");
        if (cpes == nullptr) continue;
        for (const Json& c : *cpes)
            if (c.is_string() && !c.get_ref<const std::string&>().empty())
                push_unique(out, c.get<std::string>());
    }
}

std::optional<AdvisoryRecord> cve_entry(const Json& root, const RawDocument& doc, ParseReport& report) {
    const Json* meta = member(root, "cveMetadata");
    auto id = meta ? string_member(*meta, "cveId") : std::nullopt;
    if (!id || id->empty()) {
        report.warnings.push_back({"/cveMetadata/cveId", "record without id skipped"});
        return std::nullopt;
    }
    if (string_member(*meta, "state").value_or("") == "REJECTED") {
        report.warnings.push_back({"/cveMetadata/state", *id + ": rejected record skipped"});
        return std::nullopt;
    }
    const Json* containers = member(root, "containers");
    const Json* cna = containers ? member(*containers, "cna") : nullptr;
    if (cna == nullptr || !cna->is_object()) {
        report.warnings.push_back({"/containers/cna", *id + ": no CNA container"});
        return std::nullopt;
    }

    AdvisoryRecord rec;
    rec.id = *id;
    rec.source = SourceKind::cve;
    rec.fetched_at = doc.fetched_at;

    if (const Json* descs = array_member(*cna, "descriptions")) {
        for (const Json& d : *descs) {
            if (!is_english(string_member(d, "lang").value_or(""))) continue;
            if (auto text = text_member(d, "value")) {
                rec.description = std::move(*text);
                break;
            }
        }
    }
    if (rec.description.empty()) {
        report.warnings.push_back({"/containers/cna/descriptions", *id + ": no English description"});
        return std::nullopt;
    }
    rec.title = text_member(*cna, "title");

    collect_cve_cpes(*cna, rec.cpes);
    collect_cve_metrics(*cna, "/containers/cna", report, rec.scores);
    // ADP containers carry enrichment (e.g. CISA vulnrichment scores).
    if (const Json* adp = array_member(*containers, "adp")) {
        for (std::size_t i = 0; i < adp->size(); ++i) {
            collect_cve_cpes((*adp)[i], rec.cpes);
            collect_cve_metrics((*adp)[i], "/containers/adp/" + std::to_string(i), report, rec.scores);
        }
    }
    return rec;
}

// --- OSV ---------------------------------------------------------------------

std::optional<CvssVersion> version_for_osv_type(std::string_view type) {
    if (type == "CVSS_V2") return CvssVersion::v2;
    if (type == "CVSS_V3") return CvssVersion::v3_1;
    if (type == "CVSS_V4") return CvssVersion::v4_0;
    return std::nullopt;
}

void collect_osv_severity(const Json& entry, const std::string& path, ParseReport& report,
                          std::vector<CvssEntry>& out) {
    const Json* severity = array_member(entry, "severity");
    if (severity == nullptr) return;
    // GHSA exports may carry the numeric score next to the vector under
    // database_specific.cvss.
    const Json* db = member(entry, "database_specific");
    const Json* db_cvss = db ? member(*db, "cvss") : nullptr;

    for (std::size_t i = 0; i < severity->size(); ++i) {
        const Json& s = (*severity)[i];
        const std::string where = path + "/severity/" + std::to_string(i);
        const auto type = string_member(s, "type").value_or("");
        auto type_version = version_for_osv_type(type);
        if (!type_version) continue;  // e.g. "Ubuntu" qualitative ratings

        std::optional<std::string> vector;
        std::optional<double> numeric;
        if (const Json* sc = member(s, "score")) {
            if (sc->is_number()) {
                numeric = sc->get<double>();
            } else if (sc->is_string()) {
                const auto& text = sc->get_ref<const std::string&>();
                if (auto n = parse_number_text(text)) numeric = n;
                else vector = text;
            }
        }
        CvssVersion version = *type_version;
        if (vector) {
            auto v = version_from_vector(*vector);
            if (!v) {
                report.warnings.push_back({where, "unrecognised CVSS vector '" + *vector + "' dropped"});
                continue;
            }
            version = *v;
        }
        if (!numeric && db_cvss != nullptr) {
            auto db_vector = string_member(*db_cvss, "vector_string");
            if (!db_vector || !vector || *db_vector == *vector) numeric = number_member(*db_cvss, "score");
        }
        if (!numeric) {
            report.warnings.push_back({where, "severity entry without numeric score dropped"});
            continue;
        }
        try {
            push_unique(out, CvssEntry{version, Score::from_decimal(*numeric), vector});
        } catch (const DomainError& ex) {
            report.warnings.push_back({where, ex.what()});
        }
    }
}

std::optional<AdvisoryRecord> osv_entry(const Json& entry, const std::string& path,
                                        const RawDocument& doc, ParseReport& report) {
    if (!entry.is_object()) {
        report.warnings.push_back({path.empty() ? "/" : path, "entry is not an object"});
        return std::nullopt;
    }
    auto id = string_member(entry, "id");
    if (!id || id->empty()) {
        report.warnings.push_back({path + "/id", "entry without id skipped"});
        return std::nullopt;
    }
    if (const Json* w = member(entry, "withdrawn"); w != nullptr && !w->is_null() &&
                                                      !(w->is_string() && w->get_ref<const std::string&>().empty())) {
        report.warnings.push_back({path + "/withdrawn", *id + ": withdrawn advisory skipped"});
        return std::nullopt;
    }
    auto details = text_member(entry, "details");
    auto summary = text_member(entry, "summary");
    if (!details && !summary) {
        report.warnings.push_back({path, *id + ": neither summary nor details present"});
        return std::nullopt;
    }

    AdvisoryRecord rec;
    rec.id = *id;
    rec.source = SourceKind::osv;
    rec.fetched_at = doc.fetched_at;
    rec.description = details ? *details : *summary;
    rec.title = summary;
    collect_osv_severity(entry, path, report, rec.scores);
    return rec;
}

// --- CSAF 2.0 ----------------------------------------------------------------

using ProductCpes = std::map<std::string, std::string>;

void index_product(const Json& product, ProductCpes& out) {
    auto pid = string_member(product, "product_id");
    const Json* helper = member(product, "product_identification_helper");
    auto cpe = helper ? string_member(*helper, "cpe") : std::nullopt;
    if (pid && cpe && !cpe->empty()) out.emplace(*pid, *cpe);
}

void index_branches(const Json& node, ProductCpes& out, int depth) {
    if (depth > kMaxNesting) return;
    const Json* branches = array_member(node, "branches");
    if (branches == nullptr) return;
    for (const Json& b : *branches) {
        if (const Json* p = member(b, "product")) index_product(*p, out);
        index_branches(b, out, depth + 1);
    }
}

ProductCpes index_product_tree(const Json& root) {
    ProductCpes out;
    const Json* tree = member(root, "product_tree");
    if (tree == nullptr) return out;
    index_branches(*tree, out, 0);
    if (const Json* names = array_member(*tree, "full_product_names"))
        for (const Json& p : *names) index_product(p, out);
    // A relationship product inherits the CPE of the platform it installs on
    // unless it has its own.
    if (const Json* rels = array_member(*tree, "relationships")) {
        for (const Json& r : *rels) {
            const Json* fpn = member(r, "full_product_name");
            if (fpn == nullptr) continue;
            index_product(*fpn, out);
            auto pid = string_member(*fpn, "product_id");
            auto platform = string_member(r, "relates_to_product_reference");
            if (!pid || !platform || out.count(*pid)) continue;
            if (auto it = out.find(*platform); it != out.end()) out.emplace(*pid, it->second);
        }
    }
    return out;
}

void collect_csaf_scores(const Json& vuln, const std::string& path, ParseReport& report,
                         std::vector<CvssEntry>& out) {
    const Json* scores = array_member(vuln, "scores");
    if (scores == nullptr) return;
    for (std::size_t i = 0; i < scores->size(); ++i) {
        const Json& s = (*scores)[i];
        for (std::string_view key : {"cvss_v4", "cvss_v3", "cvss_v2"}) {
            const Json* block = member(s, key);
            if (block == nullptr) continue;
            const std::string where = path + "/scores/" + std::to_string(i) + "/" + std::string(key);
            auto base = number_member(*block, "baseScore");
            if (!base) {
                report.warnings.push_back({where, "score without numeric baseScore dropped"});
                continue;
            }
            auto vector = string_member(*block, "vectorString");
            std::optional<CvssVersion> version;
            if (key == "cvss_v2") {
                version = CvssVersion::v2;
            } else if (auto declared = string_member(*block, "version")) {
                try {
                    version = parse_cvss_version(*declared);
                } catch (const DomainError&) {
                }
            }
            if (!version && vector) version = version_from_vector(*vector);
            if (!version) version = key == "cvss_v4" ? CvssVersion::v4_0 : CvssVersion::v3_1;
            try {
                push_unique(out, CvssEntry{*version, Score::from_decimal(*base), vector});
            } catch (const DomainError& ex) {
                report.warnings.push_back({where, ex.what()});
            }
        }
    }
}

std::optional<AdvisoryRecord> csaf_entry(const Json& vuln, std::size_t index,
                                         const std::optional<std::string>& doc_id,
                                         const std::optional<std::string>& doc_title,
                                         const ProductCpes& cpes, const RawDocument& doc,
                                         ParseReport& report) {
    const std::string path = "/vulnerabilities/" + std::to_string(index);
    if (!vuln.is_object()) {
        report.warnings.push_back({path, "vulnerability is not an object"});
        return std::nullopt;
    }
    AdvisoryRecord rec;
    if (auto cve = string_member(vuln, "cve"); cve && !cve->empty()) {
        rec.id = *cve;
    } else if (doc_id) {
        rec.id = *doc_id + "#" + std::to_string(index);
    } else {
        report.warnings.push_back({path, "vulnerability has no CVE id and the document has no tracking id"});
        return std::nullopt;
    }

    std::optional<std::string> description;
    std::optional<std::string> summary;
    if (const Json* notes = array_member(vuln, "notes")) {
        for (const Json& n : *notes) {
            const auto category = string_member(n, "category").value_or("");
            if (category == "description" && !description) description = text_member(n, "text");
            else if (category == "summary" && !summary) summary = text_member(n, "text");
        }
    }
    if (!description && !summary) {
        report.warnings.push_back({path + "/notes", rec.id + ": no description or summary note"});
        return std::nullopt;
    }
    rec.description = description ? *description : *summary;
    rec.title = text_member(vuln, "title");
    if (!rec.title) rec.title = doc_title;
    rec.source = SourceKind::csaf;
    rec.fetched_at = doc.fetched_at;

    if (const Json* status = member(vuln, "product_status")) {
        for (std::string_view key : {"known_affected", "first_affected", "last_affected"}) {
            const Json* ids = array_member(*status, key);
            if (ids == nullptr) continue;
            for (const Json& pid : *ids) {
                if (!pid.is_string()) continue;
                if (auto it = cpes.find(pid.get<std::string>()); it != cpes.end())
                    push_unique(rec.cpes, it->second);
            }
        }
    }
    collect_csaf_scores(vuln, path, report, rec.scores);
    return rec;
}

}  // namespace

Json to_json(const ParseReport& report) {
    Json j;
    Json records = Json::array();
    for (const auto& r : report.records) records.push_back(canonical_json(r));
    j["records"] = std::move(records);
    Json warnings = Json::array();
    for (const auto& w : report.warnings) warnings.push_back(Json{{"path", w.path}, {"message", w.message}});
    j["warnings"] = std::move(warnings);
    j["skipped"] = report.skipped;
    return j;
}

ParseReport parse_cve(const RawDocument& doc) {
    const Json root = parse_document(doc);
    if (!root.is_object()) throw ParseError(doc.origin_uri + ": CVE record must be a JSON object");
    ParseReport report;
    guarded_entry(report, "", [&] { return cve_entry(root, doc, report); });
    return report;
}

ParseReport parse_osv(const RawDocument& doc) {
    const Json root = parse_document(doc);
    ParseReport report;
    if (root.is_array()) {
        for (std::size_t i = 0; i < root.size(); ++i) {
            const std::string path = "/" + std::to_string(i);
            guarded_entry(report, path, [&] { return osv_entry(root[i], path, doc, report); });
        }
    } else if (root.is_object()) {
        guarded_entry(report, "", [&] { return osv_entry(root, "", doc, report); });
    } else {
        throw ParseError(doc.origin_uri + ": OSV document must be an object or an array of objects");
    }
    return report;
}

ParseReport parse_csaf(const RawDocument& doc) {
    const Json root = parse_document(doc);
    if (!root.is_object()) throw ParseError(doc.origin_uri + ": CSAF document must be a JSON object");
    const Json* document = member(root, "document");
    if (document == nullptr || !document->is_object())
        throw ParseError(doc.origin_uri + ": CSAF document has no 'document' section");
    const Json* tracking = member(*document, "tracking");
    const auto doc_id = tracking ? text_member(*tracking, "id") : std::nullopt;
    const auto doc_title = text_member(*document, "title");

    ParseReport report;
    const Json* vulns = member(root, "vulnerabilities");
    if (vulns == nullptr) return report;
    if (!vulns->is_array()) throw ParseError(doc.origin_uri + ": 'vulnerabilities' is not an array");

    ProductCpes cpes;
    try {
        cpes = index_product_tree(root);
    } catch (const nlohmann::json::exception& ex) {
        report.warnings.push_back({"/product_tree", std::string("product tree ignored: ") + ex.what()});
    }
    for (std::size_t i = 0; i < vulns->size(); ++i) {
        guarded_entry(report, "/vulnerabilities/" + std::to_string(i), [&] {
            return csaf_entry((*vulns)[i], i, doc_id, doc_title, cpes, doc, report);
        });
    }
    return report;
}

ParseReport parse_any(const RawDocument& doc) {
    switch (doc.source) {
    case SourceKind::cve: return parse_cve(doc);
    case SourceKind::osv: return parse_osv(doc);
    case SourceKind::csaf: return parse_csaf(doc);
    }
    throw ConfigError("no parser for source kind " + std::to_string(static_cast<int>(doc.source)));
}

}  // namespace vulnsev
