#pragma once

#include <cstdint>
#include <ostream>

namespace midl::harness {

struct VerifySummary {
  int instances = 0;
  int applicable = 0;  // instances whose premise held
  int passed = 0;
};

/// Runs the tabular suite for theorem 1, 2 or 3 on `instances` random
/// instances seeded seed, seed+1, ... and writes one JSON object per instance.
VerifySummary verify_theorem(int theorem, int instances, std::uint64_t seed, std::ostream& out);

}  // namespace midl::harness
