#pragma once

#include <string_view>

namespace lipgate {

/// Diagnostics go to stderr; set_quiet(true) silences warnings and progress.
void set_quiet(bool quiet);
bool quiet();
void log_warning(std::string_view message);
void log_info(std::string_view message);

}  // namespace lipgate
