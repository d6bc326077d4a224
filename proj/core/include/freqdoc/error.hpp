#pragma once

#include <stdexcept>
#include <string>

namespace freqdoc {

/// Precondition or contract violation on caller-supplied data.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file was read but its contents are not in the expected format.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The file system refused a read or write.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace freqdoc
