#include "drmp/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace drmp {

unsigned thread_count() {
  static const unsigned count = [] {
    const char* env = std::getenv("DRMP_THREADS");
    if (env == nullptr) return 1u;
    try {
      const long parsed = std::stol(env);
      if (parsed <= 0) return std::max(1u, std::thread::hardware_concurrency());
      return static_cast<unsigned>(parsed);
    } catch (...) {
      return 1u;
    }
  }();
  return count;
}

}  // namespace drmp
