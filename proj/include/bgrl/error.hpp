#pragma once

#include <stdexcept>
#include <string>

namespace bgrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when vector or matrix shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw Error(message);
}

inline void require_dim(bool ok, const std::string& message) {
  if (!ok) throw DimensionError(message);
}

}  // namespace bgrl
