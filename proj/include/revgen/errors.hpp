#pragma once

#include <stdexcept>
#include <string>

namespace revgen {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AuthError : Error {
    using Error::Error;
};

struct RateLimitedError : Error {
    int retry_after_seconds;
    explicit RateLimitedError(int retry_after, const std::string& msg)
        : Error(msg), retry_after_seconds(retry_after) {}
};

struct SchemaError : Error {
    using Error::Error;
};

struct TooSmallError : Error {
    using Error::Error;
};

struct EmptyCorpusError : Error {
    using Error::Error;
};

struct NothingMaskableError : Error {
    using Error::Error;
};

struct VocabMismatchError : Error {
    using Error::Error;
};

struct NonFiniteLossError : Error {
    using Error::Error;
};

struct EmptyInputError : Error {
    using Error::Error;
};

struct EmptyReferenceError : Error {
    using Error::Error;
};

struct LengthMismatchError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace revgen
