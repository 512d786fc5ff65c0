#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vulnsev/classifier.hpp"
#include "vulnsev/record.hpp"

namespace vulnsev {

inline constexpr std::size_t kMaxPredictTextBytes = 64 * 1024;

enum class BackendKind : std::uint8_t { native_baseline, external_runtime };

std::string_view to_string(BackendKind k) noexcept;
BackendKind parse_backend_kind(std::string_view name);

struct BackendSpec {
    std::string name;  // [A-Za-z0-9._-]+
    BackendKind kind = BackendKind::native_baseline;
    // native_baseline: model file. external_runtime: worker executable.
    std::filesystem::path artifact_path;
    // Extra argv for an external worker (e.g. its model directory).
    std::vector<std::string> args;
};

class Backend {
public:
    virtual ~Backend() = default;
    // Thread-safe. Throws NumericError (or Error) on inference failure.
    virtual Prediction predict(std::string_view text) = 0;
};

// A loaded ClassifierModel; immutable, so callers run fully in parallel.
class NativeBackend final : public Backend {
public:
    explicit NativeBackend(ClassifierModel model);
    Prediction predict(std::string_view text) override;

private:
    const ClassifierModel model_;
};

// A worker subprocess speaking line-delimited JSON: one {"text": ...} line in,
// one {"logits": [4 numbers]} line out (or {"error": ...}). Requests are
// served one at a time in arrival order.
class ExternalBackend final : public Backend {
public:
    ExternalBackend(const std::filesystem::path& executable, const std::vector<std::string>& args,
                    int timeout_ms = 30000);
    ~ExternalBackend() override;
    ExternalBackend(const ExternalBackend&) = delete;
    ExternalBackend& operator=(const ExternalBackend&) = delete;

    Prediction predict(std::string_view text) override;
    ClassScores logits(std::string_view text);

private:
    ClassScores exchange(const std::string& line);

    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    int timeout_ms_;
    std::string pending_;  // bytes read past the last newline
    bool broken_ = false;

    std::mutex mu_;
    std::condition_variable turn_;
    std::uint64_t next_ticket_ = 0;
    std::uint64_t serving_ = 0;
};

struct HttpReply {
    int status = 200;
    Json body;
};

// Request validation result: JSON pointer to the bad field plus a message.
struct FieldError {
    std::string pointer;
    std::string message;
};

std::optional<FieldError> validate_predict_request(const Json& body);

// Route handlers independent of the HTTP transport. The model set is fixed
// at construction: every backend loads (or construction throws ConfigError
// naming the backend) before the gateway exists.
class Gateway {
public:
    explicit Gateway(const std::vector<BackendSpec>& specs);
    // For tests: pre-built backends.
    struct Entry {
        BackendSpec spec;
        std::unique_ptr<Backend> backend;
        Timestamp loaded_at{};
    };
    explicit Gateway(std::vector<Entry> entries);

    HttpReply health() const;
    HttpReply list_models() const;
    HttpReply predict(std::string_view model, std::string_view body) const;
    HttpReply api_description() const;
    HttpReply route_not_found(std::string_view method, std::string_view path) const;

    std::vector<std::string> model_names() const;

private:
    void check_entries();

    std::vector<Entry> entries_;  // sorted by name
};

Json error_body(std::string_view code, std::string_view message);

}  // namespace vulnsev
