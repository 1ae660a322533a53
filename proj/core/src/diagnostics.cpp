#include "nrloop/diagnostics.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace nrloop {
namespace {

std::mutex& handler_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& handler_slot() {
    static WarningHandler h;
    return h;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(handler_mutex());
    return std::exchange(handler_slot(), std::move(handler));
}

void emit_warning(std::string_view message) {
    std::lock_guard lock(handler_mutex());
    if (handler_slot()) {
        handler_slot()(message);
    } else {
        std::cerr << "nrloop: warning: " << message << '\n';
    }
}

}  // namespace nrloop
