#include "vulnsev/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vulnsev/digest.hpp"
#include "vulnsev/error.hpp"

namespace vulnsev {

namespace {

template <typename T>
void append_le(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::string_view bytes, std::size_t& pos) {
    if (bytes.size() - pos < sizeof(T)) throw LoadError("model file is truncated");
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, bytes.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T value;
    std::memcpy(&value, buf, sizeof(T));
    pos += sizeof(T);
    return value;
}

nlohmann::ordered_json config_json(const ClassifierModel& m) {
    nlohmann::ordered_json j;
    j["dims"] = m.feature_space.dims;
    j["hash_seed"] = m.feature_space.hash_seed;
    j["tf_mode"] = std::string(to_string(m.feature_space.tf_mode));
    j["lowercase"] = m.tokenizer.lowercase;
    j["max_tokens"] = m.tokenizer.max_tokens;
    auto labels = nlohmann::ordered_json::array();
    for (auto s : kAllSeverities) labels.push_back(std::string(to_string(s)));
    j["labels"] = std::move(labels);
    return j;
}

}  // namespace

std::string serialize_model(const ClassifierModel& model) {
    model.validate();
    std::string out(kModelMagic);
    append_le<std::uint32_t>(out, kModelFormatVersion);
    const std::string config = config_json(model).dump();
    append_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.size()));
    out += config;
    for (double b : model.bias) append_le<double>(out, b);
    out.reserve(out.size() + model.weights.size() * sizeof(double) + 32);
    for (double w : model.weights) append_le<double>(out, w);
    Sha256 h;
    h.update(out);
    const auto digest = h.finish();
    out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
    return out;
}

ClassifierModel deserialize_model(std::string_view bytes) {
    if (bytes.size() < kModelMagic.size() || bytes.substr(0, kModelMagic.size()) != kModelMagic)
        throw LoadError("not a model file: expected format 'VSEVMODL' magic header");
    if (bytes.size() < kModelMagic.size() + 8 + 32) throw LoadError("model file is truncated");

    const std::string_view body = bytes.substr(0, bytes.size() - 32);
    Sha256 h;
    h.update(body);
    const auto digest = h.finish();
    if (std::memcmp(digest.data(), bytes.data() + body.size(), digest.size()) != 0)
        throw LoadError("model file digest mismatch (corrupted or truncated)");

    std::size_t pos = kModelMagic.size();
    const auto version = read_le<std::uint32_t>(body, pos);
    if (version != kModelFormatVersion)
        throw LoadError("unsupported model format version " + std::to_string(version) + " (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    const auto config_len = read_le<std::uint32_t>(body, pos);
    if (body.size() - pos < config_len) throw LoadError("model file is truncated");

    ClassifierModel m;
    try {
        const auto j = nlohmann::ordered_json::parse(body.substr(pos, config_len));
        m.feature_space.dims = j.at("dims").get<std::uint32_t>();
        m.feature_space.hash_seed = j.at("hash_seed").get<std::uint64_t>();
        m.feature_space.tf_mode = parse_tf_mode(j.at("tf_mode").get<std::string>());
        m.tokenizer.lowercase = j.at("lowercase").get<bool>();
        m.tokenizer.max_tokens = j.at("max_tokens").get<std::uint32_t>();
        const auto labels = j.at("labels").get<std::vector<std::string>>();
        if (labels != std::vector<std::string>{"low", "medium", "high", "critical"})
            throw LoadError("model label order is not [low, medium, high, critical]");
        m.feature_space.validate();
        m.tokenizer.validate();
    } catch (const nlohmann::json::exception& ex) {
        throw LoadError(std::string("model config block is malformed: ") + ex.what());
    } catch (const ConfigError& ex) {
        throw LoadError(std::string("model config block is invalid: ") + ex.what());
    }
    pos += config_len;

    const std::size_t n_weights = kNumSeverities * static_cast<std::size_t>(m.feature_space.dims);
    if (body.size() - pos != (kNumSeverities + n_weights) * sizeof(double))
        throw LoadError("model file size does not match its declared dimensions");
    for (auto& b : m.bias) b = read_le<double>(body, pos);
    m.weights.resize(n_weights);
    for (auto& w : m.weights) w = read_le<double>(body, pos);
    try {
        m.validate();
    } catch (const NumericError& ex) {
        throw LoadError(std::string("model parameters are invalid: ") + ex.what());
    }
    return m;
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    const std::string bytes = serialize_model(model);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out.flush()) throw IoError("write failed on " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open model file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return deserialize_model(ss.str());
    } catch (const LoadError& ex) {
        throw LoadError(path.string() + ": " + ex.what());
    }
}

std::string model_digest(const ClassifierModel& model) { return sha256_hex(serialize_model(model)); }

}  // namespace vulnsev
