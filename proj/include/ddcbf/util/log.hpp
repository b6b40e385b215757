#pragma once

#include <functional>
#include <string>

namespace ddcbf::log {

enum class Level { kInfo, kWarning };

using Sink = std::function<void(Level, const std::string&)>;

/// Replaces the process-wide sink (stderr by default). Returns the old one.
Sink set_sink(Sink sink);

void info(const std::string& message);
void warning(const std::string& message);

}  // namespace ddcbf::log
