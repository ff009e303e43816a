#pragma once

namespace fdaclass {

inline constexpr const char* version = "0.1.0";

}  // namespace fdaclass
