#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vulnsev/dataset.hpp"
#include "vulnsev/record.hpp"

namespace vulnsev::testing {

std::filesystem::path fixture_root();

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view bytes);

// Tokens unique to one class; the rest of each description is filler shared
// by all classes.
extern const char* const kPlantedKeywords[4];

struct PlantedRecord {
    std::string id;
    std::string description;
    Severity label;
    double score;
};

// n records, classes round-robin, scores drawn inside the class band.
std::vector<PlantedRecord> planted_corpus(std::size_t n, std::uint64_t seed);

// Writes the corpus as three feed directories (cve/, osv/, csaf/) under
// root, spreading records across all three formats.
void write_planted_feeds(const std::vector<PlantedRecord>& corpus, const std::filesystem::path& root);

AdvisoryRecord make_record(const std::string& id, const std::string& description,
                           std::vector<CvssEntry> scores = {});

}  // namespace vulnsev::testing
