#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fedishc {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A variable pair that no client observes jointly.
class AssumptionViolated : public Error {
 public:
  AssumptionViolated(std::string first, std::string second, const std::string& detail = {})
      : Error("no client co-holds variables (" + first + ", " + second + ")" +
              (detail.empty() ? std::string{} : ": " + detail)),
        first_(std::move(first)),
        second_(std::move(second)) {}

  const std::string& first() const noexcept { return first_; }
  const std::string& second() const noexcept { return second_; }

 private:
  std::string first_;
  std::string second_;
};

// The selected source has (statistically) vanishing third cumulant, so the
// elimination step would divide by noise.
class NearSymmetricNoise : public Error {
 public:
  NearSymmetricNoise(std::string variable, double c3, double threshold,
                     std::vector<std::string> partial_order, const std::string& detail = {})
      : Error(message(variable, c3, threshold, partial_order, detail)),
        variable_(std::move(variable)),
        c3_(c3),
        threshold_(threshold),
        partial_order_(std::move(partial_order)) {}

  const std::string& variable() const noexcept { return variable_; }
  double c3() const noexcept { return c3_; }
  double threshold() const noexcept { return threshold_; }
  const std::vector<std::string>& partial_order() const noexcept { return partial_order_; }

 private:
  static std::string message(const std::string& variable, double c3, double threshold,
                             const std::vector<std::string>& order, const std::string& detail) {
    std::string m = "near-symmetric noise at variable " + variable + ": |C3| = " +
                    std::to_string(c3 < 0 ? -c3 : c3) + " below " + std::to_string(threshold);
    if (!order.empty()) {
      m += "; order so far:";
      for (const auto& v : order) m += " " + v;
    }
    if (!detail.empty()) m += "; " + detail;
    return m;
  }

  std::string variable_;
  double c3_;
  double threshold_;
  std::vector<std::string> partial_order_;
};

class DegenerateConditioning : public Error {
 public:
  using Error::Error;
};

// Wire-format failures.
class DecodeError : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public DecodeError {
 public:
  VersionMismatch(unsigned found, unsigned expected)
      : DecodeError("wire version " + std::to_string(found) + ", expected " +
                    std::to_string(expected)) {}
};

class TruncatedPayload : public DecodeError {
 public:
  using DecodeError::DecodeError;
};

class ChecksumMismatch : public DecodeError {
 public:
  using DecodeError::DecodeError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedishc
