#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spgan/tensor.hpp"

namespace spgan {

// One-hot class field, channel order (mitochondria, membrane, background).
struct MaskImage {
  int resolution = 0;
  Tensor field;  // (3, R, R), exactly one channel 1 per pixel

  static MaskImage from_tensor(Tensor t);  // validates one-hot
  int class_at(int y, int x) const;
};

struct EMImage {
  int resolution = 0;
  Tensor intensity;  // (1, R, R), values in [0,1]

  static EMImage from_tensor(Tensor t);
};

enum class Provenance { real, synthetic };

struct PairedItem {
  MaskImage mask;
  EMImage em;
};

struct PairedDataset {
  std::vector<PairedItem> items;
  Provenance provenance = Provenance::synthetic;
  int resolution = 0;
};

// --- netpbm (binary PGM P5 / PPM P6, maxval 255) ---------------------------

struct PnmImage {
  int width = 0, height = 0, channels = 1;  // 1 = P5, 3 = P6
  std::vector<uint8_t> data;                // row-major, interleaved
};

PnmImage read_pnm(const std::string& path);
void write_pnm(const std::string& path, const PnmImage& img);

// Mask colors on disk: mitochondria (255,0,0), membrane (0,255,0),
// background (0,0,255).
MaskImage load_mask(const std::string& path, int resolution);
EMImage load_em(const std::string& path, int resolution);
void save_mask(const MaskImage& mask, const std::string& path);
void save_em(const EMImage& em, const std::string& path);

// --- resampling -------------------------------------------------------------

// Half-pixel-center conventions; nearest preserves one-hot fields.
Tensor resize_nearest(const Tensor& img, int out_h, int out_w);
Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

// --- dataset manifest --------------------------------------------------------

// Plain text, one tab-separated (mask_path, em_path) per line, '#' comments.
// Relative paths resolve against the manifest's directory.
std::vector<std::pair<std::string, std::string>> read_manifest(const std::string& path);
void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);
PairedDataset load_dataset(const std::string& manifest_path, int resolution);

}  // namespace spgan
