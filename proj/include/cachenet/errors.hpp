// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cachenet {

// Shape/dimension incompatibility between tensors fed to an op.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerically invalid values: non-finite inputs, negative probabilities,
// reductions over nothing.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Caller broke an API precondition (non-scalar loss, duplicate cache insert,
// batch too small, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Invalid configuration values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally malformed model blob.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model blob checksum mismatch.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wire frame with bad magic, version, or message type.
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wire frame cut short of its declared length.
struct FramingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Declared size beyond the configured cap.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Socket setup failure (bind, listen, or local address resolution).
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cachenet
