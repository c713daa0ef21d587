// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace intnet {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo,
  kParse,
  kValidation,
  kShape,
  kCalibration,
  kQuantization,
  kThreshold,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error(ErrorCode::kParse, "parse error at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Names the offending layer (empty when the problem is model-wide).
class ValidationError : public Error {
 public:
  ValidationError(std::string layer, const std::string& what)
      : Error(ErrorCode::kValidation, layer.empty() ? what : "layer '" + layer + "': " + what),
        layer_(std::move(layer)) {}
  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

inline Error io_error(const std::string& what) { return Error(ErrorCode::kIo, what); }
inline Error shape_error(const std::string& what) { return Error(ErrorCode::kShape, what); }
inline Error invalid_argument(const std::string& what) {
  return Error(ErrorCode::kInvalidArgument, what);
}

}  // namespace intnet
