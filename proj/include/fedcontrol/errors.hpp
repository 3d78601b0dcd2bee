#pragma once

#include <stdexcept>
#include <string>

namespace fedcontrol {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A loss value was non-finite or negative.
class InvalidLossError : public Error {
 public:
  using Error::Error;
};

// A weighting term needed a loss entry the ledger does not have.
class MissingHistoryError : public Error {
 public:
  MissingHistoryError(const std::string& what, int client, int round)
      : Error(what), client(client), round(round) {}
  int client;
  int round;
};

// Empty cohort or a normalizer that summed to zero.
class DegenerateCohortError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between parameter vectors, weights, or datasets.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An operation that needs at least one example got none.
class EmptyDataError : public Error {
 public:
  using Error::Error;
};

// Local training produced non-finite parameters or loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int round, int client)
      : Error(what), round(round), client(client) {}
  int round;
  int client;
};

// Requested partition cannot be satisfied by the dataset.
class PartitionError : public Error {
 public:
  using Error::Error;
};

// Malformed IDX file. The code distinguishes the failure classes.
class IdxError : public Error {
 public:
  enum class Code { BadMagic, TruncatedPayload, CountMismatch };
  IdxError(const std::string& what, Code code) : Error(what), code(code) {}
  Code code;
};

// File could not be opened or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Configuration value violated an invariant. Message carries the field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A confidence interval was requested from fewer than two samples.
class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedcontrol
