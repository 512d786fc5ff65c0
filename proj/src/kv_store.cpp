#include "vulnsev/kv_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include "vulnsev/error.hpp"

namespace vulnsev {

namespace {

constexpr std::string_view kMagic = "VSKVLOG1";
constexpr std::size_t kHeaderBytes = 1 + 4 + 4;

std::size_t ns_index(Namespace ns) {
    const auto i = static_cast<std::size_t>(ns);
    if (i > 1) throw StoreError("unknown namespace " + std::to_string(i));
    return i;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string encode_entry(Namespace ns, std::string_view key, std::string_view value) {
    if (key.size() > 0xFFFFFFFFu || value.size() > 0xFFFFFFFFu) throw StoreError("entry too large");
    std::string out;
    out.reserve(kHeaderBytes + key.size() + value.size() + 4);
    out.push_back(static_cast<char>(ns));
    put_u32(out, static_cast<std::uint32_t>(key.size()));
    put_u32(out, static_cast<std::uint32_t>(value.size()));
    out.append(key);
    out.append(value);
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size()));
    put_u32(out, static_cast<std::uint32_t>(crc));
    return out;
}

std::string errno_text() { return std::strerror(errno); }

void write_all(int fd, std::string_view bytes, const std::filesystem::path& path) {
    const char* p = bytes.data();
    std::size_t left = bytes.size();
    while (left > 0) {
        const ssize_t n = ::write(fd, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw StoreError(path.string() + ": write failed: " + errno_text());
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
}

std::string read_all(int fd, const std::filesystem::path& path) {
    std::string out;
    char buf[1 << 16];
    if (::lseek(fd, 0, SEEK_SET) < 0) throw StoreError(path.string() + ": seek failed: " + errno_text());
    for (;;) {
        const ssize_t n = ::read(fd, buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw StoreError(path.string() + ": read failed: " + errno_text());
        }
        if (n == 0) break;
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

}  // namespace

// --- MemoryKvStore -----------------------------------------------------------

std::optional<std::string> MemoryKvStore::get(Namespace ns, std::string_view key) const {
    std::shared_lock lock(mu_);
    const auto& m = data_[ns_index(ns)];
    auto it = m.find(key);
    if (it == m.end()) return std::nullopt;
    return it->second;
}

void MemoryKvStore::put(Namespace ns, std::string_view key, std::string_view value) {
    std::unique_lock lock(mu_);
    data_[ns_index(ns)].insert_or_assign(std::string(key), std::string(value));
}

std::vector<std::string> MemoryKvStore::keys(Namespace ns) const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : data_[ns_index(ns)]) out.push_back(k);
    return out;
}

// --- FileKvStore -------------------------------------------------------------

FileKvStore::FileKvStore(std::filesystem::path path, Mode mode) : path_(std::move(path)), mode_(mode) {
    const int flags = mode_ == Mode::read_write ? (O_RDWR | O_CREAT) : O_RDONLY;
    fd_ = ::open(path_.c_str(), flags | O_CLOEXEC, 0644);
    if (fd_ < 0) throw StoreError(path_.string() + ": cannot open store: " + errno_text());
    if (mode_ == Mode::read_write && ::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        throw StoreError(path_.string() + ": store is locked by another writer");
    }
    try {
        load();
    } catch (...) {
        ::close(fd_);
        throw;
    }
}

FileKvStore::~FileKvStore() {
    if (fd_ < 0) return;
    if (mode_ == Mode::read_write) {
        try {
            std::size_t live = data_[0].size() + data_[1].size();
            if (dead_entries_ > 1024 && dead_entries_ > live) compact();
            else ::fsync(fd_);
        } catch (...) {
            // Destructor must not throw; the log is still valid without compaction.
        }
    }
    ::close(fd_);
}

void FileKvStore::load() {
    const std::string bytes = read_all(fd_, path_);
    if (bytes.empty()) {
        if (mode_ == Mode::read_write) write_all(fd_, kMagic, path_);
        return;
    }
    if (bytes.size() < kMagic.size() || std::string_view(bytes).substr(0, kMagic.size()) != kMagic)
        throw StoreError(path_.string() + ": not a vulnsev store (bad magic)");

    std::size_t pos = kMagic.size();
    std::size_t good_end = pos;
    const auto* base = reinterpret_cast<const unsigned char*>(bytes.data());
    while (pos < bytes.size()) {
        if (bytes.size() - pos < kHeaderBytes + 4) break;  // torn tail
        const unsigned char ns = base[pos];
        const std::uint32_t klen = get_u32(base + pos + 1);
        const std::uint32_t vlen = get_u32(base + pos + 5);
        const std::size_t body = kHeaderBytes + static_cast<std::size_t>(klen) + vlen;
        if (bytes.size() - pos < body + 4) break;  // torn tail
        const auto crc = crc32(0L, base + pos, static_cast<uInt>(body));
        if (static_cast<std::uint32_t>(crc) != get_u32(base + pos + body) || ns > 1) {
            // Only the final entry may be damaged by an interrupted append.
            if (pos + body + 4 == bytes.size()) break;
            throw StoreError(path_.string() + ": checksum mismatch at offset " + std::to_string(pos));
        }
        std::string key(bytes.data() + pos + kHeaderBytes, klen);
        std::string value(bytes.data() + pos + kHeaderBytes + klen, vlen);
        auto [it, inserted] = data_[ns].insert_or_assign(std::move(key), std::move(value));
        if (!inserted) ++dead_entries_;
        pos += body + 4;
        good_end = pos;
    }
    if (good_end != bytes.size() && mode_ == Mode::read_write) {
        if (::ftruncate(fd_, static_cast<off_t>(good_end)) != 0)
            throw StoreError(path_.string() + ": cannot drop torn tail: " + errno_text());
    }
    ::lseek(fd_, 0, SEEK_END);
}

std::optional<std::string> FileKvStore::get(Namespace ns, std::string_view key) const {
    std::shared_lock lock(mu_);
    const auto& m = data_[ns_index(ns)];
    auto it = m.find(key);
    if (it == m.end()) return std::nullopt;
    return it->second;
}

void FileKvStore::append_entry(Namespace ns, std::string_view key, std::string_view value) {
    if (::lseek(fd_, 0, SEEK_END) < 0) throw StoreError(path_.string() + ": seek failed: " + errno_text());
    write_all(fd_, encode_entry(ns, key, value), path_);
}

void FileKvStore::put(Namespace ns, std::string_view key, std::string_view value) {
    if (mode_ != Mode::read_write) throw StoreError(path_.string() + ": store opened read-only");
    std::unique_lock lock(mu_);
    auto& m = data_[ns_index(ns)];
    append_entry(ns, key, value);
    auto [it, inserted] = m.insert_or_assign(std::string(key), std::string(value));
    if (!inserted) ++dead_entries_;
}

std::vector<std::string> FileKvStore::keys(Namespace ns) const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    out.reserve(data_[ns_index(ns)].size());
    for (const auto& [k, v] : data_[ns_index(ns)]) out.push_back(k);
    return out;
}

void FileKvStore::flush() {
    if (mode_ != Mode::read_write) return;
    if (::fsync(fd_) != 0) throw StoreError(path_.string() + ": fsync failed: " + errno_text());
}

void FileKvStore::compact() {
    if (mode_ != Mode::read_write) throw StoreError(path_.string() + ": store opened read-only");
    std::unique_lock lock(mu_);
    std::string image(kMagic);
    for (std::size_t ns = 0; ns < 2; ++ns)
        for (const auto& [k, v] : data_[ns]) image += encode_entry(static_cast<Namespace>(ns), k, v);

    // The replacement is locked before it is renamed into place so no other
    // writer can slip in between.
    const std::filesystem::path tmp = path_.string() + ".compact";
    const int tmp_fd = ::open(tmp.c_str(), O_RDWR | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (tmp_fd < 0) throw StoreError(tmp.string() + ": cannot create: " + errno_text());
    try {
        if (::flock(tmp_fd, LOCK_EX | LOCK_NB) != 0) throw StoreError(tmp.string() + ": cannot lock");
        write_all(tmp_fd, image, tmp);
        if (::fsync(tmp_fd) != 0) throw StoreError(tmp.string() + ": fsync failed: " + errno_text());
        if (::rename(tmp.c_str(), path_.c_str()) != 0)
            throw StoreError(path_.string() + ": rename failed: " + errno_text());
    } catch (...) {
        ::close(tmp_fd);
        ::unlink(tmp.c_str());
        throw;
    }
    ::close(fd_);
    fd_ = tmp_fd;
    ::lseek(fd_, 0, SEEK_END);
    dead_entries_ = 0;
}

}  // namespace vulnsev
