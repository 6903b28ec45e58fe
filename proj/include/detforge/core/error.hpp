#pragma once

#include <stdexcept>
#include <string>

namespace detforge {

/// Base of every domain failure raised by the library. The CLI maps these to
/// exit code 1; anything else escaping a subcommand is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition on caller-supplied arguments.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A required file or stored artifact is absent.
class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(std::string path)
      : Error("missing artifact: " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace detforge
