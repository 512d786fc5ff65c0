#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vulnsev {

// Ordinal four-class severity. The numeric value is the rank and the index
// into every probability vector in the project.
enum class Severity : std::uint8_t { low = 0, medium = 1, high = 2, critical = 3 };

inline constexpr std::size_t kNumSeverities = 4;
inline constexpr std::array<Severity, kNumSeverities> kAllSeverities = {
    Severity::low, Severity::medium, Severity::high, Severity::critical};

constexpr int rank(Severity s) noexcept { return static_cast<int>(s); }
Severity severity_from_rank(int rank);
std::string_view to_string(Severity s) noexcept;
Severity parse_severity(std::string_view name);

enum class CvssVersion : std::uint8_t { v2, v3_0, v3_1, v4_0 };

// "2.0", "3.0", "3.1", "4.0"
std::string_view to_string(CvssVersion v) noexcept;
CvssVersion parse_cvss_version(std::string_view name);

// A CVSS base score held as integer tenths (0..100) so band boundaries such
// as 3.9/4.0 compare exactly.
class Score {
public:
    constexpr Score() = default;
    static Score from_tenths(int tenths);
    // Accepts values with at most one decimal digit; anything else, or a
    // value outside [0, 10], throws DomainError.
    static Score from_decimal(double value);

    constexpr int tenths() const noexcept { return tenths_; }
    double value() const noexcept { return tenths_ / 10.0; }
    std::string to_string() const;

    friend constexpr auto operator<=>(Score, Score) = default;

private:
    constexpr explicit Score(int t) : tenths_(t) {}
    int tenths_ = 0;
};

struct CvssEntry {
    CvssVersion version = CvssVersion::v3_1;
    Score base_score;
    std::optional<std::string> vector;

    friend bool operator==(const CvssEntry&, const CvssEntry&) = default;
};

enum class ZeroScoreRule : std::uint8_t { map_to_low, exclude };

struct LabelingPolicy {
    // First version present in a record wins.
    std::vector<CvssVersion> version_precedence = {CvssVersion::v4_0, CvssVersion::v3_1,
                                                   CvssVersion::v3_0, CvssVersion::v2};
    // Lowest score (in tenths) of the medium, high and critical bands. Low
    // covers (0, medium_start); 0.0 itself is governed by zero_score_rule.
    std::array<int, 3> band_starts = {40, 70, 90};
    ZeroScoreRule zero_score_rule = ZeroScoreRule::map_to_low;

    // Throws ConfigError on gaps, overlaps, duplicate or empty precedence.
    void validate() const;

    friend bool operator==(const LabelingPolicy&, const LabelingPolicy&) = default;
};

// nullopt means "excluded" (0.0 under ZeroScoreRule::exclude).
std::optional<Severity> label_from_score(Score score, const LabelingPolicy& policy);
std::optional<Severity> label_from_score(double score, const LabelingPolicy& policy);

std::string_view to_string(ZeroScoreRule r) noexcept;
ZeroScoreRule parse_zero_score_rule(std::string_view name);

}  // namespace vulnsev
