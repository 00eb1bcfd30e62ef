#pragma once

#include <stdexcept>
#include <string>

namespace locoplan {

/// Raised when a named frame, surface, obstacle or vertex does not exist.
class NotFound : public std::out_of_range {
 public:
  explicit NotFound(const std::string& what) : std::out_of_range(what) {}
};

/// Raised by file loaders. `field` holds a JSON-pointer-like path to the
/// offending element (empty for syntax errors, which carry line/column in
/// the message instead).
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace locoplan
