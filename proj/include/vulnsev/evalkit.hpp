#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vulnsev/record.hpp"

namespace vulnsev {

struct LabelPair {
    Severity truth;
    Severity predicted;
};

using ConfusionMatrix = std::array<std::array<std::size_t, kNumSeverities>, kNumSeverities>;

struct EvalReport {
    std::size_t n = 0;
    double accuracy = 0.0;
    std::array<double, kNumSeverities> precision{};
    std::array<double, kNumSeverities> recall{};
    std::array<double, kNumSeverities> f1{};
    double macro_f1 = 0.0;
    ConfusionMatrix confusion{};  // [truth][predicted]
    // Index = |rank(predicted) - rank(truth)|.
    std::array<std::size_t, kNumSeverities> ordinal_histogram{};

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Precision, recall and F1 of a class are 0 when their denominators are 0.
// Macro-F1 averages all four classes. Empty input is a PreconditionError.
EvalReport evaluate(std::span<const LabelPair> pairs);

// Distance-1 errors over all errors; 0 when there are no errors.
double off_by_one_rate(const EvalReport& report);

Json to_json(const EvalReport& report);
// Fixed-width confusion matrix and metric table, labels in rank order.
std::string render_report(const EvalReport& report);

struct PredictionLogRow {
    std::string id;
    Severity label = Severity::low;
    Timestamp timestamp{};
};

Json to_json(const PredictionLogRow& row);
// JSONL of {"id", "label", "timestamp"}; LoadError with the line number on
// malformed rows.
std::vector<PredictionLogRow> load_predictions_log(const std::filesystem::path& path);

struct AgreementPair {
    std::string id;
    Timestamp predicted_at{};
    Severity predicted = Severity::low;
    Severity official = Severity::low;
    Timestamp official_at{};
};

struct AgreementStudy {
    std::vector<AgreementPair> pairs;
    EvalReport report;
    std::size_t log_rows = 0;
    std::size_t missing_later = 0;    // id absent from the later snapshot
    std::size_t still_unscored = 0;   // present but still without a usable score
    std::size_t not_before = 0;       // prediction not older than the snapshot
    std::size_t scored_earlier = 0;   // already scored at prediction time
};

// Joins a prediction log against a later snapshot. The official label is
// the policy applied to the later row's score fields; the official time is
// the later snapshot's creation time. When an earlier snapshot is given,
// ids that already had a score there are dropped. No joinable pair is a
// PreconditionError.
AgreementStudy agreement_study(const std::filesystem::path& predictions_log,
                               const std::filesystem::path& later_snapshot, const LabelingPolicy& policy,
                               const std::optional<std::filesystem::path>& earlier_snapshot = std::nullopt);

Json to_json(const AgreementStudy& study);

}  // namespace vulnsev
