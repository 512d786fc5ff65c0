#include "vulnsev/evalkit.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "vulnsev/dataset.hpp"
#include "vulnsev/error.hpp"

namespace vulnsev {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int decimals) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string lpad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string rpad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

EvalReport evaluate(std::span<const LabelPair> pairs) {
    if (pairs.empty()) throw PreconditionError("evaluate: no label pairs");
    EvalReport r;
    r.n = pairs.size();
    for (const auto& p : pairs) {
        ++r.confusion[rank(p.truth)][rank(p.predicted)];
        ++r.ordinal_histogram[static_cast<std::size_t>(std::abs(rank(p.predicted) - rank(p.truth)))];
    }
    std::size_t trace = 0;
    for (std::size_t c = 0; c < kNumSeverities; ++c) trace += r.confusion[c][c];
    r.accuracy = static_cast<double>(trace) / static_cast<double>(r.n);

    for (std::size_t c = 0; c < kNumSeverities; ++c) {
        std::size_t predicted = 0, actual = 0;
        for (std::size_t k = 0; k < kNumSeverities; ++k) {
            predicted += r.confusion[k][c];
            actual += r.confusion[c][k];
        }
        const double tp = static_cast<double>(r.confusion[c][c]);
        r.precision[c] = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
        r.recall[c] = actual == 0 ? 0.0 : tp / static_cast<double>(actual);
        const double pr = r.precision[c] + r.recall[c];
        r.f1[c] = pr == 0.0 ? 0.0 : 2.0 * r.precision[c] * r.recall[c] / pr;
    }
    double sum = 0.0;
    for (double f : r.f1) sum += f;
    r.macro_f1 = sum / static_cast<double>(kNumSeverities);
    return r;
}

double off_by_one_rate(const EvalReport& report) {
    const std::size_t errors = report.ordinal_histogram[1] + report.ordinal_histogram[2] + report.ordinal_histogram[3];
    if (errors == 0) return 0.0;
    return static_cast<double>(report.ordinal_histogram[1]) / static_cast<double>(errors);
}

Json to_json(const EvalReport& r) {
    Json j;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["macro_f1"] = r.macro_f1;
    Json per_class;
    for (auto s : kAllSeverities) {
        const auto c = static_cast<std::size_t>(rank(s));
        per_class[std::string(to_string(s))] = Json{{"precision", r.precision[c]}, {"recall", r.recall[c]}, {"f1", r.f1[c]}};
    }
    j["per_class"] = std::move(per_class);
    Json confusion = Json::array();
    for (const auto& row : r.confusion) confusion.push_back(row);
    j["confusion"] = std::move(confusion);
    j["confusion_labels"] = Json::array({"low", "medium", "high", "critical"});
    Json hist;
    for (std::size_t d = 0; d < kNumSeverities; ++d) hist[std::to_string(d)] = r.ordinal_histogram[d];
    j["ordinal_histogram"] = std::move(hist);
    j["off_by_one_rate"] = off_by_one_rate(r);
    return j;
}

std::string render_report(const EvalReport& r) {
    std::ostringstream out;
    out << "n = " << r.n << "   accuracy = " << fixed(r.accuracy, 3) << "   macro-F1 = " << fixed(r.macro_f1, 3) << "\n\n";
    out << "confusion (rows = truth, columns = predicted)\n";
    out << rpad("", 10);
    for (auto s : kAllSeverities) out << lpad(std::string(to_string(s)), 10);
    out << "\n";
    for (auto t : kAllSeverities) {
        out << rpad(std::string(to_string(t)), 10);
        for (auto p : kAllSeverities) out << lpad(std::to_string(r.confusion[rank(t)][rank(p)]), 10);
        out << "\n";
    }
    out << "\n" << rpad("class", 10) << lpad("precision", 10) << lpad("recall", 10) << lpad("f1", 10)
        << lpad("support", 10) << "\n";
    for (auto s : kAllSeverities) {
        const auto c = static_cast<std::size_t>(rank(s));
        std::size_t support = 0;
        for (auto v : r.confusion[c]) support += v;
        out << rpad(std::string(to_string(s)), 10) << lpad(fixed(r.precision[c], 3), 10) << lpad(fixed(r.recall[c], 3), 10)
            << lpad(fixed(r.f1[c], 3), 10) << lpad(std::to_string(support), 10) << "\n";
    }
    out << "\nordinal distance:";
    for (std::size_t d = 0; d < kNumSeverities; ++d) out << "  " << d << ": " << r.ordinal_histogram[d];
    out << "\noff-by-one share of errors: " << fixed(off_by_one_rate(r), 3) << "\n";
    return out.str();
}

Json to_json(const PredictionLogRow& row) {
    Json j;
    j["id"] = row.id;
    j["label"] = std::string(to_string(row.label));
    j["timestamp"] = format_timestamp(row.timestamp);
    return j;
}

std::vector<PredictionLogRow> load_predictions_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read predictions log " + path.string());
    std::vector<PredictionLogRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = Json::parse(line);
            PredictionLogRow row;
            row.id = j.at("id").get<std::string>();
            row.label = parse_severity(j.at("label").get<std::string>());
            row.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
            if (row.id.empty()) throw LoadError("empty id");
            rows.push_back(std::move(row));
        } catch (const std::exception& ex) {
            throw LoadError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return rows;
}

AgreementStudy agreement_study(const fs::path& predictions_log, const fs::path& later_snapshot,
                               const LabelingPolicy& policy, const std::optional<fs::path>& earlier_snapshot) {
    policy.validate();
    const auto log = load_predictions_log(predictions_log);
    const SnapshotManifest later = load_manifest(later_snapshot);

    std::map<std::string, DatasetRow, std::less<>> later_rows;
    for (auto f : {SplitFile::train, SplitFile::test, SplitFile::unlabeled})
        for (auto& row : load_split(later_snapshot, f)) later_rows.emplace(row.id, std::move(row));

    std::set<std::string, std::less<>> scored_before;
    if (earlier_snapshot) {
        for (auto f : {SplitFile::train, SplitFile::test, SplitFile::unlabeled})
            for (const auto& row : load_split(*earlier_snapshot, f))
                if (row.has_score()) scored_before.insert(row.id);
    }

    AgreementStudy study;
    study.log_rows = log.size();
    for (const auto& entry : log) {
        if (scored_before.count(entry.id)) {
            ++study.scored_earlier;
            continue;
        }
        auto it = later_rows.find(entry.id);
        if (it == later_rows.end()) {
            ++study.missing_later;
            continue;
        }
        const auto score = select_score(it->second.score_entries(), policy);
        const auto official = score ? label_from_score(score->base_score, policy) : std::nullopt;
        if (!official) {
            ++study.still_unscored;
            continue;
        }
        if (!(entry.timestamp < later.created_at)) {
            ++study.not_before;
            continue;
        }
        study.pairs.push_back({entry.id, entry.timestamp, entry.label, *official, later.created_at});
    }
    if (study.pairs.empty()) throw PreconditionError("agreement study: no prediction joins a later official score");

    std::vector<LabelPair> pairs;
    pairs.reserve(study.pairs.size());
    for (const auto& p : study.pairs) pairs.push_back({p.official, p.predicted});
    study.report = evaluate(pairs);
    return study;
}

Json to_json(const AgreementStudy& s) {
    Json j;
    j["pairs"] = s.pairs.size();
    j["log_rows"] = s.log_rows;
    j["excluded"] = Json{{"missing_later", s.missing_later},
                         {"still_unscored", s.still_unscored},
                         {"not_before", s.not_before},
                         {"scored_earlier", s.scored_earlier}};
    j["report"] = to_json(s.report);
    return j;
}

}  // namespace vulnsev
