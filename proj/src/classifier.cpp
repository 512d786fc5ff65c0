#include "vulnsev/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "vulnsev/digest.hpp"
#include "vulnsev/error.hpp"

namespace vulnsev {

namespace {

bool is_alnum(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'); }

// splitmix64 finalizer; FNV's low bits alone are too regular for masking.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

void TokenizerConfig::validate() const {
    if (max_tokens < 1) throw ConfigError("tokenizer: max_tokens must be at least 1");
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size() && out.size() < cfg.max_tokens) {
        while (i < text.size() && !is_alnum(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && is_alnum(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) break;
        std::string tok(text.substr(start, i - start));
        if (cfg.lowercase)
            for (auto& c : tok)
                if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + ('a' - 'A'));
        out.push_back(std::move(tok));
    }
    return out;
}

std::string_view to_string(TfMode m) noexcept {
    switch (m) {
    case TfMode::binary: return "binary";
    case TfMode::count: return "count";
    case TfMode::log_count: return "log_count";
    }
    return "?";
}

TfMode parse_tf_mode(std::string_view name) {
    if (name == "binary") return TfMode::binary;
    if (name == "count") return TfMode::count;
    if (name == "log_count") return TfMode::log_count;
    throw ConfigError("unknown tf_mode '" + std::string(name) + "'");
}

void FeatureSpace::validate() const {
    if (dims == 0 || (dims & (dims - 1)) != 0)
        throw ConfigError("feature space: dims must be a power of two, got " + std::to_string(dims));
    if (static_cast<std::uint8_t>(tf_mode) > 2) throw ConfigError("feature space: invalid tf_mode");
}

std::uint32_t FeatureSpace::index_of(std::string_view token) const noexcept {
    return static_cast<std::uint32_t>(mix64(fnv1a64(token, kFnvOffsetBasis ^ hash_seed)) & (dims - 1));
}

SparseVector featurize(const std::vector<std::string>& tokens, const FeatureSpace& fs) {
    std::vector<std::uint32_t> idx;
    idx.reserve(tokens.size());
    for (const auto& t : tokens) idx.push_back(fs.index_of(t));
    std::sort(idx.begin(), idx.end());

    SparseVector out;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && idx[j] == idx[i]) ++j;
        const double n = static_cast<double>(j - i);
        double v = 1.0;
        if (fs.tf_mode == TfMode::count) v = n;
        else if (fs.tf_mode == TfMode::log_count) v = 1.0 + std::log(n);
        out.push_back({idx[i], v});
        i = j;
    }
    return out;
}

ClassScores softmax(const ClassScores& logits) noexcept {
    const double m = *std::max_element(logits.begin(), logits.end());
    ClassScores p{};
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumSeverities; ++c) {
        p[c] = std::exp(logits[c] - m);
        sum += p[c];
    }
    for (auto& v : p) v /= sum;
    return p;
}

Severity argmax(const ClassScores& scores) noexcept {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumSeverities; ++c)
        if (scores[c] > scores[best]) best = c;
    return static_cast<Severity>(best);
}

ClassifierModel ClassifierModel::zeros(const FeatureSpace& fs, const TokenizerConfig& tk) {
    fs.validate();
    tk.validate();
    ClassifierModel m;
    m.feature_space = fs;
    m.tokenizer = tk;
    m.weights.assign(kNumSeverities * static_cast<std::size_t>(fs.dims), 0.0);
    return m;
}

void ClassifierModel::validate() const {
    feature_space.validate();
    tokenizer.validate();
    if (weights.size() != kNumSeverities * static_cast<std::size_t>(feature_space.dims))
        throw NumericError("weight matrix has " + std::to_string(weights.size()) + " entries, expected 4 x " +
                           std::to_string(feature_space.dims));
    for (double w : weights)
        if (!std::isfinite(w)) throw NumericError("weight matrix contains a non-finite value");
    for (double b : bias)
        if (!std::isfinite(b)) throw NumericError("bias contains a non-finite value");
}

ClassScores ClassifierModel::logits(const SparseVector& features) const {
    ClassScores z = bias;
    for (const auto& f : features) {
        if (f.index >= feature_space.dims) throw NumericError("feature index outside the feature space");
        for (std::size_t c = 0; c < kNumSeverities; ++c) z[c] += weight(c, f.index) * f.value;
    }
    return z;
}

Prediction forward(const ClassifierModel& model, const SparseVector& features) {
    for (const auto& f : features)
        if (!std::isfinite(f.value)) throw NumericError("non-finite feature value at index " + std::to_string(f.index));
    const ClassScores z = model.logits(features);
    for (double v : z)
        if (!std::isfinite(v)) throw NumericError("non-finite logit");
    Prediction p;
    p.probabilities = softmax(z);
    p.label = argmax(p.probabilities);
    return p;
}

Prediction predict_text(const ClassifierModel& model, std::string_view text) {
    return forward(model, featurize(tokenize(text, model.tokenizer), model.feature_space));
}

}  // namespace vulnsev
