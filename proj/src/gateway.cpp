#include "vulnsev/gateway.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <set>
#include <thread>

#include "vulnsev/error.hpp"
#include "vulnsev/model_io.hpp"

extern char** environ;

namespace vulnsev {

namespace {

bool valid_backend_name(std::string_view name) {
    if (name.empty() || name.size() > 64) return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
               c == '.';
    });
}

Json scores_json(const ClassScores& p) {
    Json j;
    for (auto s : kAllSeverities) j[std::string(to_string(s))] = p[rank(s)];
    return j;
}

Json example_request() {
    return Json{{"text", "A buffer overflow in XYZ software allows remote code execution with root privileges."}};
}

Json schema_ref(std::string_view name) { return Json{{"$ref", "#/components/schemas/" + std::string(name)}}; }

Json json_content(const Json& schema, const Json& example) {
    return Json{{"application/json", Json{{"schema", schema}, {"example", example}}}};
}

Json error_response(std::string_view description, std::string_view code, std::string_view message) {
    return Json{{"description", description}, {"content", json_content(schema_ref("Error"), error_body(code, message))}};
}

}  // namespace

std::string_view to_string(BackendKind k) noexcept {
    return k == BackendKind::native_baseline ? "native_baseline" : "external_runtime";
}

BackendKind parse_backend_kind(std::string_view name) {
    if (name == "native_baseline") return BackendKind::native_baseline;
    if (name == "external_runtime") return BackendKind::external_runtime;
    throw ConfigError("unknown backend kind '" + std::string(name) + "'");
}

Json error_body(std::string_view code, std::string_view message) {
    return Json{{"error", Json{{"code", code}, {"message", message}}}};
}

// --- NativeBackend -----------------------------------------------------------

NativeBackend::NativeBackend(ClassifierModel model) : model_(std::move(model)) { model_.validate(); }

Prediction NativeBackend::predict(std::string_view text) { return predict_text(model_, text); }

// --- ExternalBackend ---------------------------------------------------------

ExternalBackend::ExternalBackend(const std::filesystem::path& executable, const std::vector<std::string>& args,
                                 int timeout_ms)
    : timeout_ms_(timeout_ms) {
    // A worker that exits must surface as EPIPE, not kill the service.
    ::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2], out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw Error(std::string("pipe: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::vector<std::string> argv_storage;
    argv_storage.push_back(executable.string());
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());
    argv.push_back(nullptr);

    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, executable.c_str(), &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        throw Error("cannot start worker " + executable.string() + ": " + std::strerror(rc));
    }
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

ExternalBackend::~ExternalBackend() {
    if (to_child_ >= 0) ::close(to_child_);
    if (pid_ > 0) {
        // Closed stdin asks the worker to exit; give it a moment, then insist.
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        if (pid_ > 0) {
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, &status, 0);
        }
    }
    if (from_child_ >= 0) ::close(from_child_);
}

ClassScores ExternalBackend::exchange(const std::string& line) {
    if (broken_) throw Error("worker is no longer usable");
    const char* p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
        const ssize_t n = ::write(to_child_, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            broken_ = true;
            throw Error(std::string("worker write failed: ") + std::strerror(errno));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
    std::size_t nl;
    while ((nl = pending_.find('\n')) == std::string::npos) {
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            broken_ = true;
            throw Error("worker did not answer within " + std::to_string(timeout_ms_) + " ms");
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) continue;
        char buf[4096];
        const ssize_t n = ::read(from_child_, buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            broken_ = true;
            throw Error("worker closed its output");
        }
        pending_.append(buf, static_cast<std::size_t>(n));
    }
    const std::string reply = pending_.substr(0, nl);
    pending_.erase(0, nl + 1);

    Json j;
    try {
        j = Json::parse(reply);
    } catch (const nlohmann::json::exception&) {
        throw NumericError("worker reply is not JSON");
    }
    if (j.is_object() && j.contains("error"))
        throw NumericError("worker error: " + (j["error"].is_string() ? j["error"].get<std::string>() : j["error"].dump()));
    const Json* logits = j.is_object() && j.contains("logits") ? &j["logits"] : nullptr;
    if (logits == nullptr || !logits->is_array() || logits->size() != kNumSeverities)
        throw NumericError("worker reply lacks a 4-element logits array");
    ClassScores out{};
    for (std::size_t c = 0; c < kNumSeverities; ++c) {
        if (!(*logits)[c].is_number()) throw NumericError("worker logit is not a number");
        out[c] = (*logits)[c].get<double>();
        if (!std::isfinite(out[c])) throw NumericError("worker returned a non-finite logit");
    }
    return out;
}

ClassScores ExternalBackend::logits(std::string_view text) {
    std::unique_lock lock(mu_);
    const std::uint64_t ticket = next_ticket_++;
    turn_.wait(lock, [&] { return serving_ == ticket; });
    struct Advance {
        ExternalBackend* self;
        ~Advance() {
            ++self->serving_;
            self->turn_.notify_all();
        }
    } advance{this};
    return exchange(Json{{"text", text}}.dump() + "\n");
}

Prediction ExternalBackend::predict(std::string_view text) {
    Prediction p;
    p.probabilities = softmax(logits(text));
    p.label = argmax(p.probabilities);
    return p;
}

// --- request validation ------------------------------------------------------

std::optional<FieldError> validate_predict_request(const Json& body) {
    if (!body.is_object()) return FieldError{"", "request body must be a JSON object"};
    for (const auto& [key, value] : body.items())
        if (key != "text") return FieldError{"/" + key, "unknown field"};
    if (!body.contains("text")) return FieldError{"/text", "field is required"};
    const Json& text = body["text"];
    if (!text.is_string()) return FieldError{"/text", "must be a string"};
    const auto& s = text.get_ref<const std::string&>();
    if (s.empty()) return FieldError{"/text", "must not be empty"};
    if (s.size() > kMaxPredictTextBytes)
        return FieldError{"/text", "longer than " + std::to_string(kMaxPredictTextBytes) + " bytes; truncate client-side"};
    return std::nullopt;
}

// --- Gateway -----------------------------------------------------------------

Gateway::Gateway(const std::vector<BackendSpec>& specs) {
    std::vector<Entry> entries;
    for (const auto& spec : specs) {
        Entry e;
        e.spec = spec;
        try {
            if (!valid_backend_name(spec.name))
                throw ConfigError("name must match [A-Za-z0-9._-]{1,64}");
            if (spec.kind == BackendKind::native_baseline) {
                e.backend = std::make_unique<NativeBackend>(load_model(spec.artifact_path));
            } else {
                if (::access(spec.artifact_path.c_str(), X_OK) != 0)
                    throw ConfigError("worker " + spec.artifact_path.string() + " is not executable");
                auto ext = std::make_unique<ExternalBackend>(spec.artifact_path, spec.args);
                ext->logits("startup probe");
                e.backend = std::move(ext);
            }
        } catch (const std::exception& ex) {
            throw ConfigError("backend '" + spec.name + "' failed to load: " + ex.what());
        }
        e.loaded_at = now_utc();
        entries.push_back(std::move(e));
    }
    entries_ = std::move(entries);
    check_entries();
}

Gateway::Gateway(std::vector<Entry> entries) : entries_(std::move(entries)) { check_entries(); }

void Gateway::check_entries() {
    if (entries_.empty()) throw ConfigError("gateway needs at least one backend");
    std::set<std::string> names;
    for (const auto& e : entries_) {
        if (!valid_backend_name(e.spec.name)) throw ConfigError("backend name '" + e.spec.name + "' is not URL-safe");
        if (!names.insert(e.spec.name).second) throw ConfigError("backend name '" + e.spec.name + "' is used twice");
        if (!e.backend) throw ConfigError("backend '" + e.spec.name + "' is not loaded");
    }
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& a, const Entry& b) { return a.spec.name < b.spec.name; });
}

std::vector<std::string> Gateway::model_names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.spec.name);
    return out;
}

HttpReply Gateway::health() const {
    return {200, Json{{"status", "ready"}, {"models", entries_.size()}, {"model_names", model_names()}}};
}

HttpReply Gateway::list_models() const {
    Json models = Json::array();
    for (const auto& e : entries_)
        models.push_back(Json{{"name", e.spec.name},
                              {"kind", std::string(to_string(e.spec.kind))},
                              {"loaded_at", format_timestamp(e.loaded_at)}});
    return {200, Json{{"models", std::move(models)}}};
}

HttpReply Gateway::predict(std::string_view model, std::string_view body) const {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.spec.name == model; });
    if (it == entries_.end()) {
        Json err = error_body("model_not_found", "no model named '" + std::string(model) + "'");
        err["error"]["available_models"] = model_names();
        return {404, std::move(err)};
    }
    Json request;
    try {
        request = Json::parse(body);
    } catch (const nlohmann::json::exception& ex) {
        return {400, error_body("malformed_json", std::string("request body is not valid JSON: ") + ex.what())};
    }
    if (auto bad = validate_predict_request(request)) {
        Json err = error_body("validation_error", bad->message);
        err["error"]["pointer"] = bad->pointer;
        return {422, std::move(err)};
    }

    const auto& text = request["text"].get_ref<const std::string&>();
    const auto start = std::chrono::steady_clock::now();
    Prediction p;
    try {
        p = it->backend->predict(text);
    } catch (const std::exception& ex) {
        return {500, error_body("inference_failed", ex.what())};
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return {200, Json{{"model", it->spec.name},
                      {"label", std::string(to_string(p.label))},
                      {"scores", scores_json(p.probabilities)},
                      {"inference_ms", ms}}};
}

HttpReply Gateway::route_not_found(std::string_view method, std::string_view path) const {
    return {404, error_body("route_not_found", "no route for " + std::string(method) + " " + std::string(path))};
}

HttpReply Gateway::api_description() const {
    Json schemas;
    schemas["PredictRequest"] = Json{
        {"type", "object"},
        {"required", Json::array({"text"})},
        {"additionalProperties", false},
        {"properties",
         Json{{"text", Json{{"type", "string"}, {"minLength", 1}, {"maxLength", kMaxPredictTextBytes}}}}}};
    Json score_props;
    for (auto s : kAllSeverities)
        score_props[std::string(to_string(s))] = Json{{"type", "number"}, {"minimum", 0}, {"maximum", 1}};
    schemas["PredictResponse"] = Json{
        {"type", "object"},
        {"required", Json::array({"model", "label", "scores", "inference_ms"})},
        {"properties",
         Json{{"model", Json{{"type", "string"}}},
              {"label", Json{{"type", "string"}, {"enum", Json::array({"low", "medium", "high", "critical"})}}},
              {"scores", Json{{"type", "object"},
                              {"required", Json::array({"low", "medium", "high", "critical"})},
                              {"properties", score_props}}},
              {"inference_ms", Json{{"type", "number"}, {"minimum", 0}}}}}};
    schemas["Error"] = Json{
        {"type", "object"},
        {"required", Json::array({"error"})},
        {"properties",
         Json{{"error", Json{{"type", "object"},
                             {"required", Json::array({"code", "message"})},
                             {"properties", Json{{"code", Json{{"type", "string"}}},
                                                 {"message", Json{{"type", "string"}}},
                                                 {"pointer", Json{{"type", "string"}}},
                                                 {"available_models",
                                                  Json{{"type", "array"}, {"items", Json{{"type", "string"}}}}}}}}}}}};
    schemas["Health"] = Json{{"type", "object"},
                             {"required", Json::array({"status", "models"})},
                             {"properties", Json{{"status", Json{{"type", "string"}}},
                                                 {"models", Json{{"type", "integer"}}},
                                                 {"model_names", Json{{"type", "array"}, {"items", Json{{"type", "string"}}}}}}}};
    schemas["ModelList"] = Json{
        {"type", "object"},
        {"required", Json::array({"models"})},
        {"properties",
         Json{{"models", Json{{"type", "array"},
                              {"items", Json{{"type", "object"},
                                             {"required", Json::array({"name", "kind", "loaded_at"})},
                                             {"properties", Json{{"name", Json{{"type", "string"}}},
                                                                 {"kind", Json{{"type", "string"}}},
                                                                 {"loaded_at", Json{{"type", "string"}, {"format", "date-time"}}}}}}}}}}}};

    Json paths;
    paths["/health"]["get"] = Json{
        {"summary", "Readiness of the service"},
        {"operationId", "health"},
        {"responses",
         Json{{"200", Json{{"description", "All configured models are loaded"},
                           {"content", json_content(schema_ref("Health"),
                                                    Json{{"status", "ready"}, {"models", entries_.size()}, {"model_names", model_names()}})}}}}}};
    Json example_models = Json::array();
    for (const auto& e : entries_)
        example_models.push_back(Json{{"name", e.spec.name}, {"kind", std::string(to_string(e.spec.kind))}, {"loaded_at", "2025-01-01T00:00:00Z"}});
    paths["/models"]["get"] = Json{
        {"summary", "Models loaded at startup, sorted by name"},
        {"operationId", "listModels"},
        {"responses", Json{{"200", Json{{"description", "Model list"},
                                        {"content", json_content(schema_ref("ModelList"), Json{{"models", example_models}})}}}}}};
    paths["/openapi.json"]["get"] = Json{
        {"summary", "This document"},
        {"operationId", "apiDescription"},
        {"responses", Json{{"200", Json{{"description", "OpenAPI 3.0 description"},
                                        {"content", Json{{"application/json", Json{{"schema", Json{{"type", "object"}}}}}}}}}}}};
    for (const auto& e : entries_) {
        const ClassScores example_scores = {0.01, 0.04, 0.15, 0.80};
        paths["/models/" + e.spec.name + "/predict"]["post"] = Json{
            {"summary", "Predict the severity class of a vulnerability description with '" + e.spec.name + "'"},
            {"operationId", "predict_" + e.spec.name},
            {"requestBody", Json{{"required", true}, {"content", json_content(schema_ref("PredictRequest"), example_request())}}},
            {"responses",
             Json{{"200", Json{{"description", "Predicted label and class probabilities"},
                               {"content", json_content(schema_ref("PredictResponse"),
                                                        Json{{"model", e.spec.name},
                                                             {"label", "critical"},
                                                             {"scores", scores_json(example_scores)},
                                                             {"inference_ms", 0.4}})}}},
                  {"400", error_response("Body is not JSON", "malformed_json", "request body is not valid JSON")},
                  {"404", error_response("Unknown model", "model_not_found", "no model named 'x'")},
                  {"413", error_response("Body over 1 MiB", "payload_too_large", "Payload Too Large")},
                  {"422", error_response("Invalid request", "validation_error", "must not be empty")},
                  {"500", error_response("Backend failure", "inference_failed", "worker closed its output")}}}};
    }

    Json doc;
    doc["openapi"] = "3.0.3";
    doc["info"] = Json{{"title", "vulnsev inference gateway"},
                       {"version", "1.0.0"},
                       {"description", "Local severity classification for vulnerability descriptions. "
                                       "Inference never leaves this host."}};
    doc["paths"] = std::move(paths);
    doc["components"] = Json{{"schemas", std::move(schemas)}};
    return {200, std::move(doc)};
}

}  // namespace vulnsev
