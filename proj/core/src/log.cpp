#include "pmcmc/log.hpp"

#include <iostream>
#include <mutex>

namespace pmcmc {

namespace {
std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}
std::function<void(std::string_view)>& sink() {
  static std::function<void(std::string_view)> s;
  return s;
}
}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) {
    sink()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

void set_warning_sink(std::function<void(std::string_view)> s) {
  std::lock_guard lock(sink_mutex());
  sink() = std::move(s);
}

}  // namespace pmcmc
