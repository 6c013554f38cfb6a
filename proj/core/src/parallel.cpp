#include "rootsgd/parallel.hpp"

#include <cstdlib>
#include <string>

namespace rootsgd {

unsigned default_worker_count() {
  if (const char* env = std::getenv("ROOTSGD_WORKERS")) {
    try {
      const long n = std::stol(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
      // fall through to hardware concurrency
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace rootsgd
