#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace fluxdpd {

using WarningHandler = std::function<void(std::string_view)>;

// Installs the process-wide sink for non-fatal warnings and returns the
// previous one. The default handler discards messages.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

// Routes warnings to `handler` for the lifetime of the guard.
class ScopedWarningHandler {
public:
    explicit ScopedWarningHandler(WarningHandler handler)
        : previous_(set_warning_handler(std::move(handler))) {}
    ~ScopedWarningHandler() { set_warning_handler(std::move(previous_)); }

    ScopedWarningHandler(const ScopedWarningHandler&) = delete;
    ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

private:
    WarningHandler previous_;
};

}  // namespace fluxdpd
