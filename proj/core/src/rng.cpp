#include "vsr/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace vsr {

std::string Rng::serialize() const {
  std::ostringstream os;
  os << eng_;
  return os.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream is(state);
  is >> eng_;
  if (is.fail()) throw std::invalid_argument("rng: malformed engine state string");
}

}  // namespace vsr
