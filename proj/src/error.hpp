#pragma once

#include <stdexcept>
#include <string>

namespace bf {

// Library-wide exception. The category maps 1:1 onto the C API status codes.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    InvalidArgument,
    Io,
    Format,
    Numeric,
    Internal,
  };

  Error(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline void require(bool condition, Error::Kind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace bf
