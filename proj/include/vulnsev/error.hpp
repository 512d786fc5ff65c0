#pragma once

#include <stdexcept>
#include <string>

namespace vulnsev {

// Root of every error thrown by the library. Callers that only care about
// "something failed" catch this; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input value outside the domain of an operation (e.g. a CVSS score of 11).
class DomainError : public Error {
public:
    using Error::Error;
};

// Bytes that cannot be interpreted as the expected document format.
class ParseError : public Error {
public:
    using Error::Error;
};

// Invalid configuration: unknown enum names, duplicate feed names, bad paths.
class ConfigError : public Error {
public:
    using Error::Error;
};

class FetchError : public Error {
public:
    FetchError(std::string feed, const std::string& what)
        : Error("feed '" + feed + "': " + what), feed_(std::move(feed)) {}
    const std::string& feed() const noexcept { return feed_; }

private:
    std::string feed_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class StoreError : public Error {
public:
    using Error::Error;
};

// A stored value that no longer decodes; carries the offending key.
class ScanError : public Error {
public:
    ScanError(std::string key, const std::string& what)
        : Error("record '" + key + "': " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

// Snapshot or model file whose contents disagree with its recorded digest.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// A dataset row or model file that is structurally wrong.
class LoadError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

}  // namespace vulnsev
