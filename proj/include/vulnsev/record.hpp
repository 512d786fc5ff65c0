#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vulnsev/severity.hpp"
#include "vulnsev/text.hpp"

namespace vulnsev {

using Json = nlohmann::ordered_json;

enum class SourceKind : std::uint8_t { cve, osv, csaf };

std::string_view to_string(SourceKind k) noexcept;
// Throws ConfigError for names other than "cve", "osv", "csaf".
SourceKind parse_source_kind(std::string_view name);

// One normalized vulnerability, whatever feed it came from.
struct AdvisoryRecord {
    std::string id;
    std::optional<std::string> title;
    std::string description;
    std::vector<std::string> cpes;
    std::vector<CvssEntry> scores;
    SourceKind source = SourceKind::cve;
    Timestamp fetched_at{};

    // Throws DomainError when id or description is empty or not UTF-8.
    void validate() const;

    friend bool operator==(const AdvisoryRecord&, const AdvisoryRecord&) = default;
};

// Content fields only, fixed key order. fetched_at is left out so two fetches
// of the same upstream bytes serialize identically.
Json canonical_json(const AdvisoryRecord& record);
// Content fields plus fetched_at; this is what the store holds.
Json storage_json(const AdvisoryRecord& record);
// Reads either form; throws ParseError on shape errors.
AdvisoryRecord record_from_json(const Json& j);

Json to_json(const CvssEntry& entry);
CvssEntry cvss_entry_from_json(const Json& j);

Json to_json(const LabelingPolicy& policy);
// Throws ConfigError on unknown names or invalid band edges.
LabelingPolicy policy_from_json(const Json& j);

struct RecordLabel {
    Severity label;
    CvssEntry entry;

    friend bool operator==(const RecordLabel&, const RecordLabel&) = default;
};

// Picks the score of the highest-precedence version present (highest score
// among duplicates of that version), then bands it. nullopt = unlabeled.
std::optional<RecordLabel> label_record(const AdvisoryRecord& record, const LabelingPolicy& policy);

// Highest-precedence entry only, without banding.
std::optional<CvssEntry> select_score(const std::vector<CvssEntry>& scores,
                                      const LabelingPolicy& policy);

}  // namespace vulnsev
