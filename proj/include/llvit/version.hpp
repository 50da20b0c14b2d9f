#pragma once

namespace llvit {

// Embedded in every artifact (checkpoints, reports, netlists) so files are
// self-describing.
inline constexpr const char* kToolVersion = "llvit 0.1.0";

}  // namespace llvit
