#include "spgan/rf.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace spgan {

namespace {

int64_t floor_div2(int64_t a) { return a >= 0 ? a / 2 : (a - 1) / 2; }
int64_t ceil_div2(int64_t a) { return a >= 0 ? (a + 1) / 2 : a / 2; }

RFStat fold(const RFStat& s, const LayerSpec& l) {
  if (l.kind != LayerKind::conv) return s;
  RFStat t;
  t.rf = s.rf + (l.kernel - 1) * s.jump;
  t.jump = s.jump * l.stride;
  t.offset_x2 = s.offset_x2 +
                static_cast<int64_t>(l.kernel - 1 - 2 * l.pad.left) * s.jump;
  return t;
}

}  // namespace

std::string RFPath::joined() const {
  std::string out;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (i) out += "->";
    out += nodes[i];
  }
  return out;
}

RFReport analyze(const LayerGraph& g) {
  g.validate();
  for (const auto& l : g.layers())
    if (l.kind == LayerKind::conv_transpose)
      throw std::invalid_argument(
          "analyze: node '" + l.id +
          "' is a conv_transpose; receptive-field analysis covers "
          "downsampling (discriminator) graphs only");

  // consumer edges
  std::map<std::string, std::vector<std::string>> consumers;
  for (const auto& l : g.layers())
    for (const auto& in : l.inputs) consumers[in].push_back(l.id);

  RFReport rep;
  std::vector<std::string> stack;

  // depth-first enumeration of simple input->output paths
  auto dfs = [&](auto&& self, const std::string& id, RFStat stat) -> void {
    stack.push_back(id);
    if (id == g.output_id()) {
      rep.paths.push_back(RFPath{stack, stat});
    } else {
      for (const auto& next : consumers[id])
        self(self, next, fold(stat, g.layer(next)));
    }
    stack.pop_back();
  };
  for (const auto& in : g.input_ids()) dfs(dfs, in, RFStat{});

  if (rep.paths.empty())
    throw std::invalid_argument("analyze: no path from any input to the output node");

  rep.output_jump = rep.paths.front().stat.jump;
  for (const auto& p : rep.paths) {
    if (p.stat.jump != rep.output_jump)
      throw std::invalid_argument(
          "analyze: paths disagree on output jump: " +
          rep.paths.front().joined() + " has jump " +
          std::to_string(rep.output_jump) + ", " + p.joined() + " has jump " +
          std::to_string(p.stat.jump));
  }

  std::set<int> rfs;
  for (const auto& p : rep.paths) rfs.insert(p.stat.rf);
  rep.distinct_rf.assign(rfs.begin(), rfs.end());
  return rep;
}

AnalyticBox rf_pixel_box(const RFStat& s, int out_row, int out_col, int resolution) {
  const auto axis = [&](int pos, int& lo, int& hi, bool& clip) {
    const int64_t center_x2 = s.offset_x2 + 2LL * pos * s.jump;
    const int64_t le_x2 = center_x2 - s.rf;  // field edges in half units
    const int64_t re_x2 = center_x2 + s.rf;
    int64_t first = floor_div2(le_x2);
    int64_t last = ceil_div2(re_x2) - 1;
    if (first < 0 || last > resolution - 1) clip = true;
    first = std::max<int64_t>(first, 0);
    last = std::min<int64_t>(last, resolution - 1);
    if (first > last)
      throw std::invalid_argument("rf_pixel_box: field entirely outside the image");
    lo = static_cast<int>(first);
    hi = static_cast<int>(last);
  };
  AnalyticBox out;
  axis(out_row, out.box.y0, out.box.y1, out.clipped);
  axis(out_col, out.box.x0, out.box.x1, out.clipped);
  return out;
}

AnalyticBox rf_union_box(const RFReport& rep, int out_row, int out_col, int resolution) {
  AnalyticBox u;
  bool first = true;
  for (const auto& p : rep.paths) {
    const AnalyticBox b = rf_pixel_box(p.stat, out_row, out_col, resolution);
    if (first) {
      u = b;
      first = false;
      continue;
    }
    u.box.y0 = std::min(u.box.y0, b.box.y0);
    u.box.y1 = std::max(u.box.y1, b.box.y1);
    u.box.x0 = std::min(u.box.x0, b.box.x0);
    u.box.x1 = std::max(u.box.x1, b.box.x1);
    u.clipped = u.clipped || b.clipped;
  }
  return u;
}

LayerGraph support_mode(const LayerGraph& g) {
  std::vector<LayerSpec> specs;
  for (LayerSpec l : g.layers()) {
    l.norm = NormKind::none;
    l.act = ActKind::none;
    l.act_param = 0.0;
    if (l.kind == LayerKind::channel_softmax || l.kind == LayerKind::instance_norm)
      l.kind = LayerKind::pointwise;
    specs.push_back(std::move(l));
  }
  return LayerGraph::build(std::move(specs), g.output_id());
}

std::vector<SupportBox> empirical_support(const LayerGraph& g, const ModelParams& params,
                                          int out_row, int out_col, int resolution) {
  const auto ids = g.input_ids();
  if (ids.size() != 1)
    throw std::invalid_argument("empirical_support: graph must have exactly one input");
  const int cin = g.layer(ids[0]).out_channels;

  Tensor x = Tensor::full({cin, resolution, resolution}, 1.0);
  Tape tape;
  tape.watch(x);
  Tensor out = forward(g, params, x);
  if (out.rank() != 3 || out_row < 0 || out_row >= out.shape()[1] || out_col < 0 ||
      out_col >= out.shape()[2])
    throw std::invalid_argument("empirical_support: output pixel (" +
                                std::to_string(out_row) + "," +
                                std::to_string(out_col) + ") out of range for " +
                                shape_str(out.shape()));
  tape.backward(pick(out, 0, out_row, out_col));

  std::vector<SupportBox> boxes(static_cast<size_t>(cin));
  const auto grad = x.grad();
  for (int c = 0; c < cin; ++c) {
    SupportBox b{resolution, -1, resolution, -1};
    for (int y = 0; y < resolution; ++y) {
      const double* row =
          grad.data() + (static_cast<int64_t>(c) * resolution + y) * resolution;
      for (int xx = 0; xx < resolution; ++xx) {
        if (row[xx] != 0.0) {
          b.y0 = std::min(b.y0, y);
          b.y1 = std::max(b.y1, y);
          b.x0 = std::min(b.x0, xx);
          b.x1 = std::max(b.x1, xx);
        }
      }
    }
    if (b.y1 < b.y0)
      throw std::invalid_argument(
          "empirical_support: output pixel has empty input support");
    boxes[static_cast<size_t>(c)] = b;
  }
  return boxes;
}

std::vector<SupportBox> empirical_rf(const LayerGraph& g, int out_row, int out_col,
                                     int resolution) {
  const LayerGraph sg = support_mode(g);
  const ModelParams params = ModelParams::constant(sg, 0.01);
  return empirical_support(sg, params, out_row, out_col, resolution);
}

}  // namespace spgan
