#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsgmm {

enum class ErrorKind {
    InvalidArgument,
    DegenerateGeodesic,
    InvalidFrame,
    NumericalDegeneracy,
    DegenerateComponent,
    CorruptModel,
    ConstraintCollision,
    Infeasible,
    Parse,
    Io,
};

std::string_view to_string(ErrorKind kind);

// Numerical failures are distinguished from bad input so callers (the CLI in
// particular) can map them to different exit codes.
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace tsgmm
