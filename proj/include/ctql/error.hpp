#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctql {

enum class ErrorCode {
  NotSymmetric,
  BadLength,
  DimensionMismatch,
  NonFiniteState,
  SaturationDomain,
  InsufficientRows,
  MissingNoiseRecord,
  RankDeficient,
  NotHurwitz,
  NotStabilizable,
  Diverged,
  Infeasible,
  NotAdmissible,
  SearchExhausted,
  NumericallyIllConditioned,
  MixedProblem,
  Config,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (and the CLI) can map it to a stable, machine-parseable tag.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ctql
