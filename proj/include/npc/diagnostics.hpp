#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace npc {

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

/// Routes a warning through the installed sink. Thread safe.
inline void warn(const std::string& msg) {
  static std::mutex m;
  std::lock_guard lock(m);
  if (warning_sink()) warning_sink()(msg);
}

}  // namespace npc
