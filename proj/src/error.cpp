#include "adoptfit/error.hpp"

#include <sstream>

namespace adoptfit {

std::string_view to_string(ErrorKind kind) noexcept
{
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::validation: return "validation";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::unreachable: return "unreachable";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::io: return "io";
    case ErrorKind::transient: return "transient";
    case ErrorKind::permanent: return "permanent";
    case ErrorKind::refused: return "refused";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

namespace {
std::string unreachable_message(double target, double ceiling)
{
  std::ostringstream os;
  os.precision(17);
  os << "target " << target << " is not below the ceiling " << ceiling;
  return os.str();
}
} // namespace

UnreachableTarget::UnreachableTarget(double target, double ceiling)
  : Error(ErrorKind::unreachable, unreachable_message(target, ceiling))
  , target_(target)
  , ceiling_(ceiling)
{}

void fail(ErrorKind kind, const std::string& what)
{
  throw Error(kind, what);
}

} // namespace adoptfit
