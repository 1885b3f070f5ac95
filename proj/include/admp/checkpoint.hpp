#pragma once

#include <optional>
#include <string>

#include "admp/masking.hpp"
#include "admp/network.hpp"

namespace admp {

// Checkpoints are single JSON documents: format_version, the layer spec, and
// per-layer parameter arrays as nested decimal lists. Round-trips are
// bit-exact. Soft masks and a prune plan may ride along for phase handoff
// and audit.
struct Checkpoint {
    Network net;
    std::optional<MaskPair> masks;
    std::optional<PrunePlan> plan;
};

void save_checkpoint(const Network& net, const std::string& path,
                     const MaskPair* masks = nullptr, const PrunePlan* plan = nullptr);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace admp
