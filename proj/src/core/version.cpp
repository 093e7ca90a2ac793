#include "version.hpp"

namespace stdrive {

const char* version() { return "0.1.0"; }

}  // namespace stdrive
