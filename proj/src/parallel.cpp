#include "moyapred/parallel.hpp"

#include <cstdlib>

#include "moyapred/keyvalue.hpp"

namespace moyapred {

std::size_t workers_from_environment() {
  const char* value = std::getenv("MOYAPRED_WORKERS");
  if (value == nullptr) return 1;
  const auto n = parse_int(value);
  return n && *n >= 1 ? static_cast<std::size_t>(*n) : 1;
}

}  // namespace moyapred
