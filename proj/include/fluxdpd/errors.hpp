#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fluxdpd {

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A value lies outside the band a model can represent. `index` names the
// offending sample when the failure comes from a sequence.
class OutOfRange : public std::out_of_range {
public:
    static constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

    explicit OutOfRange(const std::string& what, std::size_t index = kNoIndex)
        : std::out_of_range(what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IdentifiabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fluxdpd
