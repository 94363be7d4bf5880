/*
 * Copyright 2026 The FPA Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FPA_ERROR_HPP_
#define FPA_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace fpa {

// Error categories. The numeric values of kConfig, kData and kDivergence are
// the CLI exit codes.
enum class ErrorKind {
  kInternal = 1,
  kConfig = 2,
  kData = 3,
  kDivergence = 4,
  kInvalidArgument = 5,
  kShape = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void Check(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) Fail(kind, what);
}

}  // namespace fpa

#endif  // FPA_ERROR_HPP_
