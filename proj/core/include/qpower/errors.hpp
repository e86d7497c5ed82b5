#pragma once

#include <stdexcept>
#include <string>

namespace qpower {

// Argument outside an allowed numeric range (DAC code, voltage, channel limit).
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Channel index other than 1 or 2.
class ChannelError : public RangeError {
 public:
  using RangeError::RangeError;
};

// Argument outside the mathematical domain of an operation (f <= 0, n < 2, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Stability report requested for a loop without a unity-gain crossing.
class NotApplicableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Compensation tuner found no solution inside its search box.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Curve fit failed to converge or the data carries no usable signal.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Snapshot or config document malformed or of an unsupported version.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Instrument returned an ERR reply; carries the reply text verbatim.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qpower
