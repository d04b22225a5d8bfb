#pragma once

#include <cassert>
#include <string>
#include <utility>
#include <variant>

namespace blender {

// Typed failure: a stable machine-readable code plus human detail.
struct Error {
  std::string code;
  std::string detail;
};

// Minimal result-or-error carrier (std::expected is not available on the
// supported toolchain).
template <class T>
class Expected {
 public:
  Expected(T value) : v_(std::move(value)) {}
  Expected(Error e) : v_(std::move(e)) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  const T& operator*() const {
    assert(ok());
    return std::get<T>(v_);
  }
  T& operator*() {
    assert(ok());
    return std::get<T>(v_);
  }
  const T* operator->() const { return &**this; }
  T* operator->() { return &**this; }

  const Error& error() const {
    assert(!ok());
    return std::get<Error>(v_);
  }

 private:
  std::variant<T, Error> v_;
};

}  // namespace blender
