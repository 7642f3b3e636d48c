#pragma once

namespace plumekit {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kSgridVersion = 1;
inline constexpr int kPgridVersion = 1;
inline constexpr int kDetectionSchemaVersion = 1;
inline constexpr int kModelSchemaVersion = 1;

}  // namespace plumekit
