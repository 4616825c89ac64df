#pragma once

namespace sremc {

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr int kResultsSchemaVersion = 1;
inline constexpr int kCheckpointVersion = 1;

}  // namespace sremc
