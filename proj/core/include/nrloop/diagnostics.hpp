#pragma once

#include <functional>
#include <string_view>

namespace nrloop {

using WarningHandler = std::function<void(std::string_view)>;

// Installs a process-wide handler for soft warnings (ill-conditioned solves,
// disconnected networks). Passing an empty handler restores the default,
// which writes to stderr. Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);

void emit_warning(std::string_view message);

}  // namespace nrloop
