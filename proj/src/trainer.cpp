#include "vulnsev/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vulnsev/error.hpp"

namespace vulnsev {

namespace {

// Uniform integer in [0, n) by rejection, so shuffles do not depend on the
// standard library's distribution implementation.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

void shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
}

struct ExampleTerms {
    double loss = 0.0;
    ClassScores dlogits{};  // p - one_hot(label)
    ClassScores probabilities{};
};

ExampleTerms example_terms(const ClassifierModel& model, const LabeledExample& ex) {
    const ClassScores z = model.logits(ex.features);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    const double log_sum = m + std::log(sum);

    ExampleTerms t;
    t.loss = log_sum - z[rank(ex.label)];
    for (std::size_t c = 0; c < kNumSeverities; ++c) {
        t.probabilities[c] = std::exp(z[c] - log_sum);
        t.dlogits[c] = t.probabilities[c] - (c == static_cast<std::size_t>(rank(ex.label)) ? 1.0 : 0.0);
    }
    return t;
}

struct FullPass {
    double loss = 0.0;
    double accuracy = 0.0;
};

FullPass full_pass(const ClassifierModel& model, const std::vector<LabeledExample>& examples) {
    FullPass out;
    if (examples.empty()) return out;
    std::size_t correct = 0;
    for (const auto& ex : examples) {
        const auto t = example_terms(model, ex);
        out.loss += t.loss;
        if (argmax(t.probabilities) == ex.label) ++correct;
    }
    out.loss /= static_cast<double>(examples.size());
    out.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
    if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ConfigError("train: warmup_fraction must lie in [0, 1)");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("train: Adam betas must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw ConfigError("train: adam_epsilon must be > 0");
}

double loss_and_gradient(const ClassifierModel& model, std::span<const LabeledExample> batch, Gradient* grad) {
    if (batch.empty()) throw PreconditionError("loss over an empty batch");
    const double scale = 1.0 / static_cast<double>(batch.size());
    if (grad != nullptr) *grad = Gradient{};
    double loss = 0.0;
    for (const auto& ex : batch) {
        const auto t = example_terms(model, ex);
        loss += t.loss;
        if (grad == nullptr) continue;
        for (std::size_t c = 0; c < kNumSeverities; ++c) grad->bias[c] += t.dlogits[c] * scale;
        for (const auto& f : ex.features) {
            auto& row = grad->weights[f.index];
            for (std::size_t c = 0; c < kNumSeverities; ++c) row[c] += t.dlogits[c] * f.value * scale;
        }
    }
    return loss * scale;
}

std::size_t warmup_steps(std::size_t total, double warmup_fraction) {
    return static_cast<std::size_t>(std::ceil(warmup_fraction * static_cast<double>(total)));
}

double lr_multiplier(std::size_t step, std::size_t total, std::size_t warmup) {
    if (step < warmup) return static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, warmup));
    if (step >= total) return 0.0;
    return static_cast<double>(total - step) / static_cast<double>(std::max<std::size_t>(1, total - warmup));
}

Json to_json(const EpochLog& e) {
    Json j;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["train_accuracy"] = e.train_accuracy;
    j["eval_accuracy"] = e.eval_accuracy ? Json(*e.eval_accuracy) : Json(nullptr);
    j["learning_rate"] = e.learning_rate;
    return j;
}

LabeledExample make_example(const DatasetRow& row, const FeatureSpace& fs, const TokenizerConfig& tk) {
    if (!row.label) throw PreconditionError("row '" + row.id + "' has no label");
    // Title and CPEs are deliberately not model input.
    return {featurize(tokenize(row.description, tk), fs), *row.label};
}

double accuracy(const ClassifierModel& model, const std::vector<LabeledExample>& examples) {
    return full_pass(model, examples).accuracy;
}

TrainResult train(const std::vector<DatasetRow>& rows, const TrainConfig& cfg, const FeatureSpace& fs,
                  const TokenizerConfig& tk, const std::vector<DatasetRow>* eval_rows) {
    fs.validate();
    tk.validate();
    std::vector<LabeledExample> examples;
    examples.reserve(rows.size());
    for (const auto& r : rows) examples.push_back(make_example(r, fs, tk));
    std::vector<LabeledExample> eval;
    if (eval_rows != nullptr)
        for (const auto& r : *eval_rows) eval.push_back(make_example(r, fs, tk));
    return train_examples(examples, cfg, fs, tk, eval_rows != nullptr ? &eval : nullptr);
}

TrainResult train_examples(const std::vector<LabeledExample>& examples, const TrainConfig& cfg,
                           const FeatureSpace& fs, const TokenizerConfig& tk,
                           const std::vector<LabeledExample>* eval) {
    cfg.validate();
    if (examples.empty()) throw PreconditionError("no training rows");

    TrainResult result{ClassifierModel::zeros(fs, tk), {}};
    ClassifierModel& model = result.model;
    const std::size_t dims = fs.dims;
    const std::size_t n = examples.size();
    const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    const std::size_t warmup = warmup_steps(total_steps, cfg.warmup_fraction);

    // Adam moments. A parameter whose gradient has always been zero has zero
    // moments and (from a zero init) zero weight, so its AdamW update is
    // exactly zero; only indices some batch has touched are visited.
    std::vector<double> m_w(kNumSeverities * dims, 0.0), v_w(kNumSeverities * dims, 0.0);
    std::vector<double> g_w(kNumSeverities * dims, 0.0);
    ClassScores m_b{}, v_b{};
    std::vector<LabeledExample> batch;
    Gradient grad;
    std::vector<std::uint8_t> active(dims, 0);
    std::vector<std::uint32_t> active_list;
    std::vector<std::uint32_t> touched;

    std::mt19937_64 rng(cfg.rng_seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::size_t step = 0;
    double beta1_pow = 1.0, beta2_pow = 1.0;
    double last_lr = 0.0;
    for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            batch.assign(end - start, LabeledExample{});
            for (std::size_t k = start; k < end; ++k) batch[k - start] = examples[order[k]];
            const double batch_loss = loss_and_gradient(model, batch, &grad);
            touched.clear();
            for (const auto& [j, row] : grad.weights) {
                if (!active[j]) {
                    active[j] = 1;
                    active_list.push_back(j);
                }
                touched.push_back(j);
                for (std::size_t c = 0; c < kNumSeverities; ++c) g_w[c * dims + j] = row[c];
            }
            const ClassScores& g_b = grad.bias;
            if (!std::isfinite(batch_loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(step) + "; lower the learning rate");

            const double lr = cfg.learning_rate * lr_multiplier(step, total_steps, warmup);
            last_lr = lr;
            beta1_pow *= cfg.adam_beta1;
            beta2_pow *= cfg.adam_beta2;
            const double bc1 = 1.0 - beta1_pow;
            const double bc2 = 1.0 - beta2_pow;
            const double decay = 1.0 - lr * cfg.weight_decay;

            for (std::uint32_t j : active_list) {
                for (std::size_t c = 0; c < kNumSeverities; ++c) {
                    const std::size_t p = c * dims + j;
                    const double g = g_w[p];
                    m_w[p] = cfg.adam_beta1 * m_w[p] + (1.0 - cfg.adam_beta1) * g;
                    v_w[p] = cfg.adam_beta2 * v_w[p] + (1.0 - cfg.adam_beta2) * g * g;
                    double& w = model.weights[p];
                    w *= decay;
                    w -= lr * (m_w[p] / bc1) / (std::sqrt(v_w[p] / bc2) + cfg.adam_epsilon);
                }
            }
            for (std::size_t c = 0; c < kNumSeverities; ++c) {
                m_b[c] = cfg.adam_beta1 * m_b[c] + (1.0 - cfg.adam_beta1) * g_b[c];
                v_b[c] = cfg.adam_beta2 * v_b[c] + (1.0 - cfg.adam_beta2) * g_b[c] * g_b[c];
                model.bias[c] -= lr * (m_b[c] / bc1) / (std::sqrt(v_b[c] / bc2) + cfg.adam_epsilon);
            }
            for (std::uint32_t j : touched)
                for (std::size_t c = 0; c < kNumSeverities; ++c) g_w[c * dims + j] = 0.0;
        }

        const FullPass pass = full_pass(model, examples);
        if (!std::isfinite(pass.loss))
            throw TrainingError("non-finite training loss after epoch " + std::to_string(epoch));
        EpochLog log;
        log.epoch = epoch;
        log.loss = pass.loss;
        log.train_accuracy = pass.accuracy;
        if (eval != nullptr && !eval->empty()) log.eval_accuracy = accuracy(model, *eval);
        log.learning_rate = last_lr;
        result.log.push_back(log);
    }
    return result;
}

double gradient_check(const ClassifierModel& model, std::span<const LabeledExample> batch, double step) {
    if (batch.empty() || batch.size() > 8) throw PreconditionError("gradient check needs 1 to 8 examples");
    if (model.feature_space.dims > 64) throw PreconditionError("gradient check needs dims <= 64");

    Gradient grad;
    loss_and_gradient(model, batch, &grad);

    ClassifierModel probe = model;
    auto central = [&](double& param) {
        const double saved = param;
        param = saved + step;
        const double up = loss_and_gradient(probe, batch, nullptr);
        param = saved - step;
        const double down = loss_and_gradient(probe, batch, nullptr);
        param = saved;
        return (up - down) / (2.0 * step);
    };
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); };

    double worst = 0.0;
    for (std::size_t c = 0; c < kNumSeverities; ++c) worst = std::max(worst, rel(grad.bias[c], central(probe.bias[c])));
    for (const auto& [index, row] : grad.weights)
        for (std::size_t c = 0; c < kNumSeverities; ++c)
            worst = std::max(worst, rel(row[c], central(probe.weight(c, index))));
    return worst;
}

}  // namespace vulnsev
