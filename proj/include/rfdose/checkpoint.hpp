#pragma once

#include <string>

#include "rfdose/condnet.hpp"

namespace rfdose {

// CNET1 checkpoint: ASCII manifest (magic, network config, tensor count, one
// "name dims..." line per tensor) followed by little-endian f64 payloads in
// manifest order. Covers weights, biases, batch-norm affine parameters and
// running statistics; optimizer state is not persisted.
void save_checkpoint(CondNet& net, const std::string& path);

// Rebuilds the network from the stored config; every manifest entry must
// match the constructed shapes exactly.
CondNet load_checkpoint(const std::string& path);

} // namespace rfdose
