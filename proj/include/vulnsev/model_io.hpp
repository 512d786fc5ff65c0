#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "vulnsev/classifier.hpp"

namespace vulnsev {

inline constexpr std::string_view kModelMagic = "VSEVMODL";
inline constexpr std::uint32_t kModelFormatVersion = 1;

// Model file layout:
//   8 bytes  magic "VSEVMODL"
//   u32      format version
//   u32      config length, then that many bytes of JSON (feature space,
//            tokenizer, label order)
//   f64 x 4  bias
//   f64 x 4*dims  weights, class-major
//   32 bytes SHA-256 of everything above
// Integers and floats are little-endian.
std::string serialize_model(const ClassifierModel& model);
// Throws LoadError on bad magic, unknown version, truncation, or a digest
// mismatch.
ClassifierModel deserialize_model(std::string_view bytes);

void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

// SHA-256 hex of the serialized model; equal digests mean equal models.
std::string model_digest(const ClassifierModel& model);

}  // namespace vulnsev
