#pragma once

namespace induct {

inline constexpr const char* kToolName = "induct-mc";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace induct
