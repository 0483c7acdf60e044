#pragma once

#include <stdexcept>
#include <string>

namespace proxsafe {

enum class ErrorKind {
    format,      // malformed EMB1 or JSONL input
    io,          // missing or unwritable file
    degenerate,  // zero-norm embedding or direction
    shape,       // dimension / row / layer mismatch
    alignment,   // manifest does not line up with its matrix
    parameter,   // out-of-range argument
    input,       // invalid record set (duplicates, mixed tags, ...)
    split,       // invalid refused/complied split
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    // 2 for environment problems (missing files), 1 for everything about the data.
    int exit_code() const noexcept { return kind_ == ErrorKind::io ? 2 : 1; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace proxsafe
