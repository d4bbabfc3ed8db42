// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace odecme {

enum class ErrorCode {
  InvalidArgument,  // bad parameter value or unsupported combination
  Dimension,        // shape / size mismatch between operands
  Numeric,          // overflow, divergence, singular transform
  Io,               // file read/write or format failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  static Error invalid(const std::string& what) { return {ErrorCode::InvalidArgument, what}; }
  static Error dim(const std::string& what) { return {ErrorCode::Dimension, what}; }
  static Error numeric(const std::string& what) { return {ErrorCode::Numeric, what}; }
  static Error io(const std::string& what) { return {ErrorCode::Io, what}; }

 private:
  ErrorCode code_;
};

}  // namespace odecme
