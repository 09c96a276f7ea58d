#pragma once

#include <stdexcept>
#include <string>

namespace crpt {

// Contract violations carry a machine-checkable code so callers (and tests)
// can dispatch on the failure kind instead of parsing messages.
enum class Errc {
  ZeroNorm,
  ShapeMismatch,
  NonFinite,
  UnknownDomain,
  OutOfBounds,
  NotReset,
  CapacityExceeded,
  InsufficientData,
  IoError,
  BadMagic,
  VersionMismatch,
  NotNormalized,
  NonPositive,
  Overflow,
  PadTooLarge,
  EmptyBatch,
  InsufficientNeighbors,
  TooFewPrototypes,
  RankDeficient,
  DegenerateDenominator,
  ConfigInvalid,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace crpt
