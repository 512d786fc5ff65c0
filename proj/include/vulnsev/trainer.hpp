#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "vulnsev/classifier.hpp"
#include "vulnsev/dataset.hpp"

namespace vulnsev {

struct TrainConfig {
    double learning_rate = 1e-2;
    std::uint32_t batch_size = 16;
    std::uint32_t epochs = 5;
    double weight_decay = 0.01;
    double warmup_fraction = 0.06;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t rng_seed = 42;

    void validate() const;
};

struct LabeledExample {
    SparseVector features;
    Severity label = Severity::low;
};

// Gradient of the mean cross-entropy over a batch. Weight rows are keyed by
// feature index and only exist for indices the batch touches.
struct Gradient {
    ClassScores bias{};
    std::map<std::uint32_t, ClassScores> weights;
};

// Mean cross-entropy of the batch; fills grad when non-null.
double loss_and_gradient(const ClassifierModel& model, std::span<const LabeledExample> batch, Gradient* grad);

// Multiplier on the base learning rate for optimizer step `step` (0-based)
// out of `total`: linear ramp from 0 over the warm-up steps, then linear decay
// to 0.
double lr_multiplier(std::size_t step, std::size_t total, std::size_t warmup);
std::size_t warmup_steps(std::size_t total, double warmup_fraction);

struct EpochLog {
    std::uint32_t epoch = 0;  // 1-based
    double loss = 0.0;        // mean cross-entropy over the training set after the epoch
    double train_accuracy = 0.0;
    std::optional<double> eval_accuracy;
    double learning_rate = 0.0;  // rate used by the epoch's last step
};

Json to_json(const EpochLog& e);

struct TrainResult {
    ClassifierModel model;
    std::vector<EpochLog> log;
};

LabeledExample make_example(const DatasetRow& row, const FeatureSpace& fs, const TokenizerConfig& tk);

// Mini-batch AdamW (decoupled decay on weights, none on bias) from a zero
// initialised model. Single-threaded and seeded, so identical inputs give
// bitwise-identical models. Rows without a label are a PreconditionError.
TrainResult train(const std::vector<DatasetRow>& rows, const TrainConfig& cfg, const FeatureSpace& fs,
                  const TokenizerConfig& tk, const std::vector<DatasetRow>* eval_rows = nullptr);
TrainResult train_examples(const std::vector<LabeledExample>& examples, const TrainConfig& cfg,
                           const FeatureSpace& fs, const TokenizerConfig& tk,
                           const std::vector<LabeledExample>* eval = nullptr);

double accuracy(const ClassifierModel& model, const std::vector<LabeledExample>& examples);

// Largest relative difference between the analytic gradient and central
// finite differences (step 1e-5) over every bias and every touched weight.
// Relative error is |a - n| / max(|a|, |n|, 1e-6). Requires at most 8
// examples and dims <= 64.
double gradient_check(const ClassifierModel& model, std::span<const LabeledExample> batch, double step = 1e-5);

}  // namespace vulnsev
