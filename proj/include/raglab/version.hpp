#pragma once

namespace raglab {

inline constexpr char kEngineVersion[] = "0.1.0";

}  // namespace raglab
