#include "vqmd/common/error.hpp"

namespace vqmd {

void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInput(msg);
}

}  // namespace vqmd
