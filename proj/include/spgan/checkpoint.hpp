#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "spgan/tensor.hpp"

namespace spgan {

// Versioned flat binary container: magic "SPGN", u32 version, length-
// prefixed UTF-8 config text, then named tensors (u32 name length, name,
// u32 rank, u64 extents, little-endian IEEE-754 doubles), and a trailing
// 64-bit FNV-1a checksum of all preceding bytes. Save/load round-trips
// byte-exactly.
//
// Reserved tensor names used by the training loops:
//   g.<layer>.kernel / g.<layer>.bias     generator parameters
//   d.<layer>.kernel / d.<layer>.bias     discriminator parameters
//   adam.{g,d}.<param>.m / .v             optimizer moments
//   adam.{g,d}.step                       optimizer step counters
//   rng.stream                            training RNG state
//   meta.step                             global step number
struct Checkpoint {
  uint32_t version = 1;
  std::string config_text;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace spgan
