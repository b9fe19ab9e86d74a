#pragma once

#include <stdexcept>
#include <string>

namespace kerrwave {

// Invalid arguments or domain violations (CLI exit code 2).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical gate failed; `residual` carries the achieved error measure (CLI exit code 3).
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InputError(msg);
}

} // namespace kerrwave
