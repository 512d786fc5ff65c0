#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace vulnsev {

enum class Namespace : std::uint8_t { records = 0, meta = 1 };

// Namespaced key -> bytes mapping. Single writer, any number of readers.
class KvStore {
public:
    virtual ~KvStore() = default;

    virtual std::optional<std::string> get(Namespace ns, std::string_view key) const = 0;
    virtual void put(Namespace ns, std::string_view key, std::string_view value) = 0;
    // All keys of a namespace in ascending byte order.
    virtual std::vector<std::string> keys(Namespace ns) const = 0;
    // Makes every completed put durable.
    virtual void flush() = 0;
};

class MemoryKvStore final : public KvStore {
public:
    std::optional<std::string> get(Namespace ns, std::string_view key) const override;
    void put(Namespace ns, std::string_view key, std::string_view value) override;
    std::vector<std::string> keys(Namespace ns) const override;
    void flush() override {}

private:
    mutable std::shared_mutex mu_;
    std::map<std::string, std::string, std::less<>> data_[2];
};

// Single-file append log with an in-memory index. Each entry is
//   u8 namespace | u32 key length | u32 value length | key | value | u32 crc32
// after an 8-byte magic header, all integers little-endian. The latest entry
// for a key wins. A torn final entry (crash mid-append) is discarded; any
// other checksum failure refuses to open.
class FileKvStore final : public KvStore {
public:
    enum class Mode { read_only, read_write };

    // read_write creates the file if missing and takes an exclusive advisory
    // lock; a second writer gets StoreError.
    explicit FileKvStore(std::filesystem::path path, Mode mode = Mode::read_write);
    ~FileKvStore() override;
    FileKvStore(const FileKvStore&) = delete;
    FileKvStore& operator=(const FileKvStore&) = delete;

    std::optional<std::string> get(Namespace ns, std::string_view key) const override;
    void put(Namespace ns, std::string_view key, std::string_view value) override;
    std::vector<std::string> keys(Namespace ns) const override;
    void flush() override;

    // Rewrites the log with one entry per live key.
    void compact();

    const std::filesystem::path& path() const noexcept { return path_; }
    std::size_t dead_entries() const noexcept { return dead_entries_; }

private:
    void load();
    void append_entry(Namespace ns, std::string_view key, std::string_view value);

    std::filesystem::path path_;
    Mode mode_;
    int fd_ = -1;
    std::size_t dead_entries_ = 0;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::string, std::less<>> data_[2];
};

}  // namespace vulnsev
