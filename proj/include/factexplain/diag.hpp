#pragma once

#include <functional>
#include <string>

namespace fx::diag {

using WarningHandler = std::function<void(const std::string&)>;

/// Emits a warning through the installed handler (stderr by default).
void warn(const std::string& message);

/// Replaces the warning handler; returns the previous one.
WarningHandler set_warning_handler(WarningHandler handler);

/// Installs a handler for the lifetime of the object; used by tests to count warnings.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  [[nodiscard]] int count() const { return count_; }
  [[nodiscard]] const std::string& last() const { return last_; }

 private:
  WarningHandler previous_;
  int count_ = 0;
  std::string last_;
};

}  // namespace fx::diag
