#include "spgan/image.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spgan {

namespace {

void fail(const std::string& msg) { throw std::runtime_error(msg); }

int read_pnm_token(std::istream& in, const std::string& path) {
  // whitespace-separated integer; '#' starts a comment to end of line
  for (;;) {
    const int c = in.peek();
    if (c == EOF) fail("pnm '" + path + "': truncated header");
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    break;
  }
  int v = 0;
  if (!(in >> v)) fail("pnm '" + path + "': malformed header integer");
  return v;
}

}  // namespace

PnmImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("pnm '" + path + "': cannot open for reading");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  PnmImage img;
  if (magic[0] == 'P' && magic[1] == '5')
    img.channels = 1;
  else if (magic[0] == 'P' && magic[1] == '6')
    img.channels = 3;
  else
    fail("pnm '" + path + "': not a binary PGM (P5) or PPM (P6) file");
  img.width = read_pnm_token(in, path);
  img.height = read_pnm_token(in, path);
  const int maxval = read_pnm_token(in, path);
  if (img.width <= 0 || img.height <= 0)
    fail("pnm '" + path + "': non-positive dimensions");
  if (maxval != 255) fail("pnm '" + path + "': only maxval 255 is supported");
  in.get();  // single whitespace before raster
  const size_t n = static_cast<size_t>(img.width) * img.height * img.channels;
  img.data.resize(n);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n))
    fail("pnm '" + path + "': truncated raster");
  return img;
}

void write_pnm(const std::string& path, const PnmImage& img) {
  if (img.channels != 1 && img.channels != 3)
    fail("pnm '" + path + "': channels must be 1 or 3");
  if (img.data.size() !=
      static_cast<size_t>(img.width) * img.height * img.channels)
    fail("pnm '" + path + "': raster size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("pnm '" + path + "': cannot open for writing");
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) fail("pnm '" + path + "': write failed");
}

// --- resampling -------------------------------------------------------------

Tensor resize_nearest(const Tensor& img, int out_h, int out_w) {
  if (img.rank() != 3)
    throw std::invalid_argument("resize_nearest: expected rank-3, got " +
                                shape_str(img.shape()));
  const int c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
  Tensor out = Tensor::zeros({c, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    const int iy = std::min(h - 1, static_cast<int>((oy + 0.5) * sy));
    for (int ox = 0; ox < out_w; ++ox) {
      const int ix = std::min(w - 1, static_cast<int>((ox + 0.5) * sx));
      for (int ch = 0; ch < c; ++ch)
        out.data()[(static_cast<int64_t>(ch) * out_h + oy) * out_w + ox] =
            img.data()[(static_cast<int64_t>(ch) * h + iy) * w + ix];
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
  if (img.rank() != 3)
    throw std::invalid_argument("resize_bilinear: expected rank-3, got " +
                                shape_str(img.shape()));
  const int c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
  Tensor out = Tensor::zeros({c, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = (oy + 0.5) * sy - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, h - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = std::clamp(fy - y0, 0.0, 1.0);
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = (ox + 0.5) * sx - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, w - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = std::clamp(fx - x0, 0.0, 1.0);
      for (int ch = 0; ch < c; ++ch) {
        const double* p = img.data() + static_cast<int64_t>(ch) * h * w;
        const double v00 = p[static_cast<int64_t>(y0) * w + x0];
        const double v01 = p[static_cast<int64_t>(y0) * w + x1];
        const double v10 = p[static_cast<int64_t>(y1) * w + x0];
        const double v11 = p[static_cast<int64_t>(y1) * w + x1];
        const double top = v00 + (v01 - v00) * wx;
        const double bot = v10 + (v11 - v10) * wx;
        out.data()[(static_cast<int64_t>(ch) * out_h + oy) * out_w + ox] =
            top + (bot - top) * wy;
      }
    }
  }
  return out;
}

// --- mask / em types ---------------------------------------------------------

MaskImage MaskImage::from_tensor(Tensor t) {
  if (t.rank() != 3 || t.shape()[0] != 3 || t.shape()[1] != t.shape()[2])
    throw std::invalid_argument("MaskImage: expected (3,R,R), got " +
                                shape_str(t.shape()));
  const int r = t.shape()[1];
  const int64_t hw = static_cast<int64_t>(r) * r;
  for (int64_t p = 0; p < hw; ++p) {
    int ones = 0;
    for (int c = 0; c < 3; ++c) {
      const double v = t.data()[c * hw + p];
      if (v == 1.0)
        ++ones;
      else if (v != 0.0)
        throw std::invalid_argument("MaskImage: non-binary value at pixel " +
                                    std::to_string(p));
    }
    if (ones != 1)
      throw std::invalid_argument("MaskImage: pixel " + std::to_string(p) +
                                  " is not one-hot");
  }
  return MaskImage{r, std::move(t)};
}

int MaskImage::class_at(int y, int x) const {
  const int64_t hw = static_cast<int64_t>(resolution) * resolution;
  const int64_t p = static_cast<int64_t>(y) * resolution + x;
  for (int c = 0; c < 3; ++c)
    if (field.data()[c * hw + p] == 1.0) return c;
  return -1;
}

EMImage EMImage::from_tensor(Tensor t) {
  if (t.rank() != 3 || t.shape()[0] != 1 || t.shape()[1] != t.shape()[2])
    throw std::invalid_argument("EMImage: expected (1,R,R), got " +
                                shape_str(t.shape()));
  for (int64_t i = 0; i < t.size(); ++i) {
    const double v = t.data()[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("EMImage: intensity " + std::to_string(v) +
                                  " outside [0,1]");
  }
  return EMImage{t.shape()[1], std::move(t)};
}

MaskImage load_mask(const std::string& path, int resolution) {
  const PnmImage raw = read_pnm(path);
  if (raw.channels != 3)
    fail("load_mask '" + path + "': mask files must be 3-channel PPM (P6)");
  // raw RGB planes as a tensor, nearest resize, then per-pixel argmax
  const int h = raw.height, w = raw.width;
  Tensor rgb = Tensor::zeros({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        rgb.data()[(static_cast<int64_t>(c) * h + y) * w + x] =
            raw.data[(static_cast<size_t>(y) * w + x) * 3 + static_cast<size_t>(c)];
  const Tensor rs = resize_nearest(rgb, resolution, resolution);
  Tensor field = Tensor::zeros({3, resolution, resolution});
  const int64_t hw = static_cast<int64_t>(resolution) * resolution;
  for (int64_t p = 0; p < hw; ++p) {
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (rs.data()[c * hw + p] > rs.data()[best * hw + p]) best = c;
    field.data()[best * hw + p] = 1.0;
  }
  return MaskImage{resolution, std::move(field)};
}

EMImage load_em(const std::string& path, int resolution) {
  const PnmImage raw = read_pnm(path);
  if (raw.channels != 1)
    fail("load_em '" + path + "': EM files must be grayscale PGM (P5)");
  Tensor gray = Tensor::zeros({1, raw.height, raw.width});
  for (int64_t i = 0; i < gray.size(); ++i)
    gray.data()[i] = raw.data[static_cast<size_t>(i)] / 255.0;
  Tensor rs = resize_bilinear(gray, resolution, resolution);
  return EMImage{resolution, std::move(rs)};
}

void save_mask(const MaskImage& mask, const std::string& path) {
  const int r = mask.resolution;
  PnmImage img;
  img.width = r;
  img.height = r;
  img.channels = 3;
  img.data.assign(static_cast<size_t>(r) * r * 3, 0);
  const int64_t hw = static_cast<int64_t>(r) * r;
  for (int64_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c)
      img.data[static_cast<size_t>(p * 3 + c)] =
          mask.field.data()[c * hw + p] == 1.0 ? 255 : 0;
  write_pnm(path, img);
}

void save_em(const EMImage& em, const std::string& path) {
  const int r = em.resolution;
  PnmImage img;
  img.width = r;
  img.height = r;
  img.channels = 1;
  img.data.resize(static_cast<size_t>(r) * r);
  for (int64_t i = 0; i < em.intensity.size(); ++i) {
    const double v = std::clamp(em.intensity.data()[i], 0.0, 1.0);
    img.data[static_cast<size_t>(i)] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  write_pnm(path, img);
}

// --- manifest ----------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("manifest '" + path + "': cannot open");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail("manifest '" + path + "' line " + std::to_string(line_no) +
           ": expected tab-separated mask and EM paths");
    std::string mask = line.substr(0, tab);
    std::string em = line.substr(tab + 1);
    while (!em.empty() && (em.back() == '\r' || em.back() == ' ')) em.pop_back();
    out.emplace_back(std::move(mask), std::move(em));
  }
  return out;
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path);
  if (!out) fail("manifest '" + path + "': cannot open for writing");
  for (const auto& [m, e] : entries) out << m << "\t" << e << "\n";
  if (!out) fail("manifest '" + path + "': write failed");
}

PairedDataset load_dataset(const std::string& manifest_path, int resolution) {
  const auto entries = read_manifest(manifest_path);
  if (entries.empty()) fail("manifest '" + manifest_path + "': no entries");
  const auto base = std::filesystem::path(manifest_path).parent_path();
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  PairedDataset ds;
  ds.provenance = Provenance::real;
  ds.resolution = resolution;
  for (const auto& [m, e] : entries)
    ds.items.push_back(
        PairedItem{load_mask(resolve(m), resolution), load_em(resolve(e), resolution)});
  return ds;
}

}  // namespace spgan
