#pragma once

#include <stdexcept>
#include <string>

namespace rtgp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};
struct NotPositiveDefinite : Error {
  using Error::Error;
};
struct ConvergenceFailure : Error {
  using Error::Error;
};
struct BreakdownError : Error {
  using Error::Error;
};
struct NegativePivot : Error {
  using Error::Error;
};
struct NonPositiveRitzValue : Error {
  using Error::Error;
};
struct UnknownParam : Error {
  using Error::Error;
};
struct OddFeatureCount : Error {
  using Error::Error;
};
struct PrefixOutOfRange : Error {
  using Error::Error;
};
struct InnerNotPositiveDefinite : Error {
  using Error::Error;
};
struct EmptySupport : Error {
  using Error::Error;
};
struct SupplierExhausted : Error {
  using Error::Error;
};
struct ZeroProbabilitySample : Error {
  using Error::Error;
};
struct NonPositiveParam : Error {
  using Error::Error;
};
struct NonFiniteGradient : Error {
  using Error::Error;
};
struct ParseError : Error {
  ParseError(std::size_t row, std::size_t col, const std::string& what)
      : Error("parse error at row " + std::to_string(row) + ", column " +
              std::to_string(col) + ": " + what),
        row(row),
        col(col) {}
  std::size_t row;
  std::size_t col;
};
struct EmptyData : Error {
  using Error::Error;
};

}  // namespace rtgp
