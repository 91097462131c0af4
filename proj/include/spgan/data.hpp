#pragma once

#include <cstdint>
#include <optional>

#include "spgan/image.hpp"
#include "spgan/tensor.hpp"

namespace spgan {

// Procedural stand-in corpus: mitochondria-like perturbed ellipses
// (5-20% of the area), membrane-like dilated random walks, and an EM
// rendering that is a deterministic function of the mask, so the
// mask-to-image mapping is learnable by construction.
PairedDataset synth_corpus(int n, int resolution, uint64_t seed);

struct AugmentedPair {
  MaskImage mask;
  std::optional<EMImage> em;
};

// Independent 50% vertical/horizontal flips and a square crop of side
// floor(R*sqrt(crop_area)) at a uniform position, identical on mask and
// image, resized back to R (nearest for the mask, bilinear for the image).
AugmentedPair augment(const MaskImage& mask, const EMImage* em, double crop_area,
                      uint64_t seed);

// Per-pixel argmax of a softmax field; ties break toward the lower channel.
// Rejects inputs whose per-pixel channel sum deviates from 1 by more than 1e-6.
MaskImage harden_mask(const Tensor& soft);

}  // namespace spgan
