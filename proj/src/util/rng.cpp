#include "ddcbf/util/rng.hpp"

#include <sstream>

#include "ddcbf/errors.hpp"

namespace ddcbf {

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_rng(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw IoError("corrupt RNG state");
}

}  // namespace ddcbf
