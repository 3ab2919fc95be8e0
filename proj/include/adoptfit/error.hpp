#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adoptfit {

enum class ErrorKind
{
  domain,             // argument outside the mathematical domain
  validation,         // malformed or inconsistent input
  insufficient_data,  // too few usable observations
  unreachable,        // target beyond the curve's ceiling
  not_found,
  io,
  transient,          // network failure that survived all retries
  permanent,          // remote refused the request
  refused,            // operation not applicable to the given state
  internal
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

//! Raised by invert_time when the requested count is at or above the ceiling.
class UnreachableTarget : public Error
{
public:
  UnreachableTarget(double target, double ceiling);

  double target() const noexcept { return target_; }
  double ceiling() const noexcept { return ceiling_; }

private:
  double target_;
  double ceiling_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

} // namespace adoptfit
