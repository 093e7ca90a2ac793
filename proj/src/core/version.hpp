#pragma once

namespace stdrive {

const char* version();

}  // namespace stdrive
