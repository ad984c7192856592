#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isac {

/// Invalid scenario / experiment configuration or argument.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem or parse failure; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model and a dataset were produced for different scenarios.
class HashMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training hit a NaN/Inf loss on a specific dataset sample.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::size_t sample, double value)
      : std::runtime_error("non-finite loss " + std::to_string(value) + " on sample " +
                           std::to_string(sample)),
        sample_(sample) {}
  std::size_t sample() const noexcept { return sample_; }

 private:
  std::size_t sample_;
};

}  // namespace isac
