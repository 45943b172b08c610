#pragma once

namespace dtmc {

inline constexpr const char* kVersion = "0.1.0";

}
