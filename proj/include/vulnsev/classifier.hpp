#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vulnsev/severity.hpp"

namespace vulnsev {

struct TokenizerConfig {
    bool lowercase = true;
    // Tokens past this count are dropped.
    std::uint32_t max_tokens = 512;

    void validate() const;
    friend bool operator==(const TokenizerConfig&, const TokenizerConfig&) = default;
};

// Maximal runs of ASCII letters and digits; every other byte separates.
std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg);

enum class TfMode : std::uint8_t { binary = 0, count = 1, log_count = 2 };

std::string_view to_string(TfMode m) noexcept;
TfMode parse_tf_mode(std::string_view name);

struct FeatureSpace {
    std::uint32_t dims = 1u << 18;  // power of two
    std::uint64_t hash_seed = 0x5f3759df9e3779b9ULL;
    TfMode tf_mode = TfMode::log_count;

    void validate() const;
    std::uint32_t index_of(std::string_view token) const noexcept;
    friend bool operator==(const FeatureSpace&, const FeatureSpace&) = default;
};

struct SparseFeature {
    std::uint32_t index = 0;
    double value = 0.0;

    friend bool operator==(const SparseFeature&, const SparseFeature&) = default;
};

// Sorted by index, no duplicate indices.
using SparseVector = std::vector<SparseFeature>;

// binary: 1, count: n, log_count: 1 + ln(n) for a bucket hit n times.
SparseVector featurize(const std::vector<std::string>& tokens, const FeatureSpace& fs);

using ClassScores = std::array<double, kNumSeverities>;

struct Prediction {
    Severity label = Severity::low;
    ClassScores probabilities{};
};

// Max-subtracted softmax.
ClassScores softmax(const ClassScores& logits) noexcept;
// Exact ties resolve to the lowest rank.
Severity argmax(const ClassScores& scores) noexcept;

// Hashed bag-of-words features into one linear layer; classes are always
// ordered low, medium, high, critical.
struct ClassifierModel {
    FeatureSpace feature_space;
    TokenizerConfig tokenizer;
    // Row-major [class][dims].
    std::vector<double> weights;
    ClassScores bias{};

    static ClassifierModel zeros(const FeatureSpace& fs, const TokenizerConfig& tk);

    double weight(std::size_t cls, std::uint32_t index) const { return weights[cls * feature_space.dims + index]; }
    double& weight(std::size_t cls, std::uint32_t index) { return weights[cls * feature_space.dims + index]; }

    // Throws NumericError on non-finite parameters or a shape mismatch.
    void validate() const;
    ClassScores logits(const SparseVector& features) const;

    friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

// Throws NumericError when a feature value (or the resulting logits) is
// not finite.
Prediction forward(const ClassifierModel& model, const SparseVector& features);
Prediction predict_text(const ClassifierModel& model, std::string_view text);

}  // namespace vulnsev
