#pragma once

#include <stdexcept>
#include <string>

namespace skembed {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad measure, invalid path, out-of-range parameter.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A configured size cap was exceeded (state count, oracle horizon).
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// A cost functional needs an augmented feature the lattice does not track.
class FeatureError : public Error {
 public:
  FeatureError(const std::string& feature, const std::string& what)
      : Error(what), feature_(feature) {}
  const std::string& feature() const { return feature_; }

 private:
  std::string feature_;
};

}  // namespace skembed
