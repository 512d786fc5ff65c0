#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vulnsev/record.hpp"

namespace vulnsev {

struct RawDocument {
    SourceKind source = SourceKind::cve;
    std::string bytes;
    std::string origin_uri;
    // Stamped onto every record parsed from this document.
    Timestamp fetched_at{};
};

struct ParseWarning {
    std::string path;  // JSON pointer into the document
    std::string message;

    friend bool operator==(const ParseWarning&, const ParseWarning&) = default;
};

struct ParseReport {
    std::vector<AdvisoryRecord> records;
    std::vector<ParseWarning> warnings;
    std::size_t skipped = 0;  // entries seen minus records produced

    friend bool operator==(const ParseReport&, const ParseReport&) = default;
};

// Golden-file form: {"records": [...canonical...], "warnings": [...], "skipped": n}.
Json to_json(const ParseReport& report);

// Each parser throws ParseError when the bytes are not a JSON document of the
// expected top-level shape. Problems inside an entry become warnings and the
// entry is skipped.

// One CVE JSON 5.x record.
ParseReport parse_cve(const RawDocument& doc);
// One OSV entry or an array of entries (GHSA, PySec).
ParseReport parse_osv(const RawDocument& doc);
// One CSAF 2.0 document; yields a record per vulnerability.
ParseReport parse_csaf(const RawDocument& doc);

// Dispatches on doc.source; an out-of-range source is a ConfigError.
ParseReport parse_any(const RawDocument& doc);

}  // namespace vulnsev
