#pragma once

namespace l2e {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace l2e
