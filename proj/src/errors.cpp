#include "divavg/errors.hpp"

namespace divavg {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage:
      return "usage";
    case ErrorKind::Validation:
      return "validation";
    case ErrorKind::HorizonExhausted:
      return "horizon_exhausted";
    case ErrorKind::NonPsd:
      return "non_psd";
    case ErrorKind::Numerical:
      return "numerical";
  }
  return "unknown";
}

}  // namespace divavg
