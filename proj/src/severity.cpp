#include "vulnsev/severity.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vulnsev/error.hpp"

namespace vulnsev {

namespace {
constexpr std::array<std::string_view, kNumSeverities> kSeverityNames = {"low", "medium", "high",
                                                                        "critical"};
}

Severity severity_from_rank(int r) {
    if (r < 0 || r >= static_cast<int>(kNumSeverities))
        throw DomainError("severity rank out of range: " + std::to_string(r));
    return static_cast<Severity>(r);
}

std::string_view to_string(Severity s) noexcept { return kSeverityNames[rank(s)]; }

Severity parse_severity(std::string_view name) {
    for (std::size_t i = 0; i < kSeverityNames.size(); ++i)
        if (kSeverityNames[i] == name) return static_cast<Severity>(i);
    throw DomainError("unknown severity label '" + std::string(name) + "'");
}

std::string_view to_string(CvssVersion v) noexcept {
    switch (v) {
    case CvssVersion::v2: return "2.0";
    case CvssVersion::v3_0: return "3.0";
    case CvssVersion::v3_1: return "3.1";
    case CvssVersion::v4_0: return "4.0";
    }
    return "?";
}

CvssVersion parse_cvss_version(std::string_view name) {
    if (name == "2.0" || name == "2") return CvssVersion::v2;
    if (name == "3.0") return CvssVersion::v3_0;
    if (name == "3.1") return CvssVersion::v3_1;
    if (name == "4.0" || name == "4") return CvssVersion::v4_0;
    throw DomainError("unknown CVSS version '" + std::string(name) + "'");
}

Score Score::from_tenths(int tenths) {
    if (tenths < 0 || tenths > 100)
        throw DomainError("CVSS score out of range [0, 10]: " + std::to_string(tenths / 10.0));
    return Score(tenths);
}

Score Score::from_decimal(double value) {
    if (!std::isfinite(value) || value < 0.0 || value > 10.0)
        throw DomainError("CVSS score out of range [0, 10]: " + std::to_string(value));
    const double scaled = value * 10.0;
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > 1e-6)
        throw DomainError("CVSS score has more than one decimal digit: " + std::to_string(value));
    return Score(static_cast<int>(rounded));
}

std::string Score::to_string() const {
    return std::to_string(tenths_ / 10) + "." + std::to_string(tenths_ % 10);
}

void LabelingPolicy::validate() const {
    if (version_precedence.empty()) throw ConfigError("labeling: version precedence is empty");
    std::set<CvssVersion> seen(version_precedence.begin(), version_precedence.end());
    if (seen.size() != version_precedence.size())
        throw ConfigError("labeling: version precedence lists a version twice");
    // Low must keep at least the 0.1 score, so the medium band starts above it.
    if (band_starts[0] < 2 || band_starts[2] > 100 || !(band_starts[0] < band_starts[1]) ||
        !(band_starts[1] < band_starts[2]))
        throw ConfigError("labeling: band edges must satisfy 0.1 < medium < high < critical <= 10.0");
}

std::optional<Severity> label_from_score(Score score, const LabelingPolicy& policy) {
    const int t = score.tenths();
    if (t == 0 && policy.zero_score_rule == ZeroScoreRule::exclude) return std::nullopt;
    if (t >= policy.band_starts[2]) return Severity::critical;
    if (t >= policy.band_starts[1]) return Severity::high;
    if (t >= policy.band_starts[0]) return Severity::medium;
    return Severity::low;
}

std::optional<Severity> label_from_score(double score, const LabelingPolicy& policy) {
    return label_from_score(Score::from_decimal(score), policy);
}

std::string_view to_string(ZeroScoreRule r) noexcept {
    return r == ZeroScoreRule::map_to_low ? "map_to_low" : "exclude";
}

ZeroScoreRule parse_zero_score_rule(std::string_view name) {
    if (name == "map_to_low") return ZeroScoreRule::map_to_low;
    if (name == "exclude") return ZeroScoreRule::exclude;
    throw ConfigError("unknown zero_score_rule '" + std::string(name) + "'");
}

}  // namespace vulnsev
