#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace microfarm {

enum class ErrorKind {
    config,
    validation,
    dimension,
    framing,
    version,
    integrity,
    storage,
    data,
    size,
    argument,
    io,
    parse,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace microfarm
