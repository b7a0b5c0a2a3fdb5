#include "factexplain/diag.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace fx::diag {

namespace {
std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& handler() {
  static WarningHandler h = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return h;
}
}  // namespace

void warn(const std::string& message) {
  WarningHandler h;
  {
    std::lock_guard lock(handler_mutex());
    h = handler();
  }
  if (h) h(message);
}

WarningHandler set_warning_handler(WarningHandler next) {
  std::lock_guard lock(handler_mutex());
  return std::exchange(handler(), std::move(next));
}

ScopedWarningCapture::ScopedWarningCapture()
    : previous_(set_warning_handler([this](const std::string& msg) {
        ++count_;
        last_ = msg;
      })) {}

ScopedWarningCapture::~ScopedWarningCapture() { set_warning_handler(std::move(previous_)); }

}  // namespace fx::diag
