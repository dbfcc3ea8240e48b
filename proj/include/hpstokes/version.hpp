#pragma once

namespace hps {

inline constexpr const char* version = "0.1.0";

}  // namespace hps
