// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dofsplat {

/// Violated precondition on an API call (shape mismatch, out-of-range argument).
class ContractError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation (non-positive depth, non-unit direction).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

class BehindCameraError : public DomainError {
  public:
    using DomainError::DomainError;
};

/// Malformed or unsupported file content. Carries the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
  public:
    FormatError(const std::string &what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), mOffset(offset) {}
    explicit FormatError(const std::string &what)
        : std::runtime_error(what), mOffset(0) {}

    std::size_t offset() const noexcept { return mOffset; }

  private:
    std::size_t mOffset;
};

class UnsupportedVersionError : public FormatError {
  public:
    using FormatError::FormatError;
};

/// Invalid synthetic scene description.
class SpecError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

} // namespace dofsplat
