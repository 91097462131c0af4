#include "spgan/models.hpp"

#include <stdexcept>

namespace spgan {

namespace {

constexpr double kLeakySlope = 0.2;

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2i(int v) {
  int d = 0;
  while (v > 1) {
    v >>= 1;
    ++d;
  }
  return d;
}

LayerSpec conv(std::string id, std::string in, int ch, int k, int s, Pad4 pad,
               NormKind norm, ActKind act) {
  LayerSpec l;
  l.id = std::move(id);
  l.kind = LayerKind::conv;
  l.kernel = k;
  l.stride = s;
  l.pad = pad;
  l.out_channels = ch;
  l.norm = norm;
  l.act = act;
  l.act_param = act == ActKind::leaky_relu ? kLeakySlope : 0.0;
  l.inputs = {std::move(in)};
  return l;
}

LayerSpec deconv(std::string id, std::string in, int ch, NormKind norm, ActKind act) {
  LayerSpec l;
  l.id = std::move(id);
  l.kind = LayerKind::conv_transpose;
  l.kernel = 4;
  l.stride = 2;
  l.pad = pad_all(1);
  l.out_channels = ch;
  l.norm = norm;
  l.act = act;
  l.inputs = {std::move(in)};
  return l;
}

LayerSpec input_node(std::string id, int ch) {
  LayerSpec l;
  l.id = std::move(id);
  l.kind = LayerKind::input;
  l.out_channels = ch;
  return l;
}

}  // namespace

DiscVariant disc_variant_from_string(const std::string& s) {
  if (s == "p16") return DiscVariant::p16;
  if (s == "p70") return DiscVariant::p70;
  if (s == "skip") return DiscVariant::skip;
  throw std::invalid_argument("unknown discriminator variant '" + s +
                              "' (expected p16, p70 or skip)");
}

const char* to_string(DiscVariant v) {
  switch (v) {
    case DiscVariant::p16: return "p16";
    case DiscVariant::p70: return "p70";
    case DiscVariant::skip: return "skip";
  }
  return "?";
}

LayerGraph build_mask_generator(int resolution, int noise_side) {
  static const int kSchedule[6] = {256, 256, 128, 64, 32, 3};
  if (noise_side < 1)
    throw std::invalid_argument("build_mask_generator: noise_side must be >= 1");
  int d = 0, r = noise_side;
  while (r < resolution) {
    r *= 2;
    ++d;
  }
  if (r != resolution || d < 1)
    throw std::invalid_argument(
        "build_mask_generator: resolution " + std::to_string(resolution) +
        " is not noise_side * 2^d (noise_side=" + std::to_string(noise_side) + ", d>=1)");
  if (d > 6)
    throw std::invalid_argument(
        "build_mask_generator: depth " + std::to_string(d) +
        " exceeds the 6-block channel schedule; use a larger noise_side");

  LayerGraph g;
  g.add(input_node("z", noise_side));
  std::string prev = "z";
  for (int i = 0; i < d; ++i) {
    const int ch = kSchedule[6 - d + i];
    const bool last = i == d - 1;
    std::string id = "g" + std::to_string(i + 1);
    g.add(deconv(id, prev, ch, last ? NormKind::none : NormKind::instance,
                 last ? ActKind::softmax : ActKind::relu));
    prev = std::move(id);
  }
  g.set_output(prev);
  g.validate();
  return g;
}

LayerGraph build_unet_generator(int resolution, int base_channels) {
  if (!is_pow2(resolution) || resolution < 8)
    throw std::invalid_argument("build_unet_generator: resolution " +
                                std::to_string(resolution) +
                                " must be a power of two >= 8");
  if (base_channels < 1)
    throw std::invalid_argument("build_unet_generator: base_channels must be >= 1");
  const int levels = log2i(resolution);
  const int cap = base_channels * 32;
  std::vector<int> ec(static_cast<size_t>(levels));
  for (int i = 0; i < levels; ++i)
    ec[static_cast<size_t>(i)] = std::min(base_channels << i, cap);

  LayerGraph g;
  g.add(input_node("x", 3));
  std::string prev = "x";
  for (int i = 1; i <= levels; ++i) {
    std::string id = "e" + std::to_string(i);
    g.add(conv(id, prev, ec[static_cast<size_t>(i - 1)], 4, 2, pad_all(1),
               i == 1 ? NormKind::none : NormKind::instance, ActKind::leaky_relu));
    prev = std::move(id);
  }
  for (int j = 1; j <= levels - 1; ++j) {
    std::string up = "d" + std::to_string(j);
    g.add(deconv(up, prev, ec[static_cast<size_t>(levels - 1 - j)],
                 NormKind::instance, ActKind::relu));
    LayerSpec cat;
    cat.id = "c" + std::to_string(j);
    cat.kind = LayerKind::concat;
    cat.inputs = {up, "e" + std::to_string(levels - j)};
    g.add(std::move(cat));
    prev = "c" + std::to_string(j);
  }
  g.add(deconv("out", prev, 1, NormKind::none, ActKind::sigmoid));
  g.set_output("out");
  g.validate();
  return g;
}

LayerGraph build_patch_discriminator(DiscVariant variant, int in_channels,
                                     int resolution) {
  if (variant == DiscVariant::skip)
    return build_skip_patch_discriminator(in_channels, resolution);
  if (resolution % 8 != 0)
    throw std::invalid_argument("build_patch_discriminator: resolution " +
                                std::to_string(resolution) +
                                " must be divisible by 8");
  if (in_channels < 1)
    throw std::invalid_argument("build_patch_discriminator: in_channels must be >= 1");

  LayerGraph g;
  g.add(input_node("x", in_channels));
  if (variant == DiscVariant::p70) {
    g.add(conv("t1", "x", 16, 4, 2, pad_all(1), NormKind::none, ActKind::leaky_relu));
    g.add(conv("t2", "t1", 32, 4, 2, pad_all(1), NormKind::instance, ActKind::leaky_relu));
    g.add(conv("t3", "t2", 64, 4, 2, pad_all(1), NormKind::instance, ActKind::leaky_relu));
    g.add(conv("t4", "t3", 64, 4, 1, Pad4{1, 2, 1, 2}, NormKind::instance,
               ActKind::leaky_relu));
    g.add(conv("t5", "t4", 64, 4, 1, Pad4{1, 2, 1, 2}, NormKind::instance,
               ActKind::leaky_relu));
    g.add(conv("head", "t5", 1, 1, 1, Pad4{}, NormKind::none, ActKind::sigmoid));
  } else {  // p16
    g.add(conv("t1", "x", 16, 4, 2, pad_all(1), NormKind::none, ActKind::leaky_relu));
    g.add(conv("t2", "t1", 32, 3, 2, pad_all(1), NormKind::instance, ActKind::leaky_relu));
    g.add(conv("t3", "t2", 64, 3, 2, pad_all(1), NormKind::instance, ActKind::leaky_relu));
    g.add(conv("head", "t3", 1, 1, 1, Pad4{}, NormKind::none, ActKind::sigmoid));
  }
  g.set_output("head");
  g.validate();
  return g;
}

LayerGraph build_skip_patch_discriminator(int in_channels, int resolution) {
  if (resolution % 8 != 0)
    throw std::invalid_argument("build_skip_patch_discriminator: resolution " +
                                std::to_string(resolution) +
                                " must be divisible by 8");
  if (in_channels < 1)
    throw std::invalid_argument(
        "build_skip_patch_discriminator: in_channels must be >= 1");

  LayerGraph g;
  g.add(input_node("x", in_channels));
  // trunk, receptive fields 4 / 10 / 22 / 46 / 70
  g.add(conv("t1", "x", 16, 4, 2, pad_all(1), NormKind::none, ActKind::leaky_relu));
  g.add(conv("t2", "t1", 32, 4, 2, pad_all(1), NormKind::instance, ActKind::leaky_relu));
  g.add(conv("t3", "t2", 64, 4, 2, pad_all(1), NormKind::instance, ActKind::leaky_relu));
  g.add(conv("t4", "t3", 64, 4, 1, Pad4{1, 2, 1, 2}, NormKind::instance,
             ActKind::leaky_relu));
  g.add(conv("t5", "t4", 64, 4, 1, Pad4{1, 2, 1, 2}, NormKind::instance,
             ActKind::leaky_relu));
  // skip stem (rf 8) and the three shallow paths (rf 16 / 20 / 32)
  g.add(conv("s1a", "t1", 16, 3, 2, pad_all(1), NormKind::instance, ActKind::leaky_relu));
  g.add(conv("s1b", "s1a", 16, 3, 2, pad_all(1), NormKind::instance, ActKind::leaky_relu));
  g.add(conv("s2", "s1a", 16, 4, 2, pad_all(1), NormKind::instance, ActKind::leaky_relu));
  g.add(conv("s3a", "s1a", 16, 1, 2, Pad4{}, NormKind::instance, ActKind::leaky_relu));
  g.add(conv("s3b", "s3a", 16, 4, 1, Pad4{1, 2, 1, 2}, NormKind::instance,
             ActKind::leaky_relu));
  LayerSpec fuse;
  fuse.id = "fuse";
  fuse.kind = LayerKind::concat;
  fuse.inputs = {"s1b", "s2", "s3b", "t5"};
  g.add(std::move(fuse));
  g.add(conv("head", "fuse", 1, 1, 1, Pad4{}, NormKind::none, ActKind::sigmoid));
  g.set_output("head");
  g.validate();
  return g;
}

LayerGraph build_discriminator(DiscVariant variant, int in_channels, int resolution) {
  return build_patch_discriminator(variant, in_channels, resolution);
}

}  // namespace spgan
