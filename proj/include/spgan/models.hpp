#pragma once

#include "spgan/graph.hpp"

namespace spgan {

enum class DiscVariant { p16, p70, skip };

DiscVariant disc_variant_from_string(const std::string& s);
const char* to_string(DiscVariant v);

// Noise-to-mask generator: d = log2(R / noise_side) transposed-conv blocks
// (kernel 4, stride 2, pad 1), channel schedule the last d entries of
// [256, 256, 128, 64, 32, 3]; instance norm + relu everywhere except the
// final block, which applies channel softmax with no norm.
LayerGraph build_mask_generator(int resolution, int noise_side = 8);

// U-Net mask-to-image generator: log2(R) stride-2 encoder blocks down to a
// 1x1 bottleneck (leaky_relu 0.2), mirrored transposed-conv decoder with
// skip concatenations (relu), sigmoid single-channel output. Channels grow
// from base_channels, capped at 32x base.
LayerGraph build_unet_generator(int resolution, int base_channels = 16);

// Single-receptive-field patch discriminators (p70 and p16 variants);
// output map is 1 x R/8 x R/8.
LayerGraph build_patch_discriminator(DiscVariant variant, int in_channels,
                                     int resolution);

// Multi-scale discriminator whose fusion head sees paths with receptive
// fields 16, 20, 32 and 70; output map is 1 x R/8 x R/8.
LayerGraph build_skip_patch_discriminator(int in_channels, int resolution);

// Dispatch on variant (skip included).
LayerGraph build_discriminator(DiscVariant variant, int in_channels, int resolution);

}  // namespace spgan
