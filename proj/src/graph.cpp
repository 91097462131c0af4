#include "spgan/graph.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace spgan {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::input: return "input";
    case LayerKind::conv: return "conv";
    case LayerKind::conv_transpose: return "conv_transpose";
    case LayerKind::pointwise: return "pointwise";
    case LayerKind::channel_softmax: return "channel_softmax";
    case LayerKind::instance_norm: return "instance_norm";
    case LayerKind::concat: return "concat";
  }
  return "?";
}

const char* to_string(NormKind n) {
  return n == NormKind::instance ? "instance" : "none";
}

std::string to_string(ActKind a, double param) {
  switch (a) {
    case ActKind::none: return "none";
    case ActKind::relu: return "relu";
    case ActKind::leaky_relu: {
      std::ostringstream os;
      os << "leaky_relu:" << param;
      return os.str();
    }
    case ActKind::sigmoid: return "sigmoid";
    case ActKind::softmax: return "softmax";
  }
  return "?";
}

void LayerGraph::add(LayerSpec spec) {
  if (spec.id.empty()) fail("LayerGraph: empty node id");
  if (index_.count(spec.id)) fail("LayerGraph: duplicate node id '" + spec.id + "'");
  for (const auto& in : spec.inputs)
    if (!index_.count(in))
      fail("LayerGraph: node '" + spec.id + "' references unknown input '" + in + "'");
  index_[spec.id] = layers_.size();
  layers_.push_back(std::move(spec));
}

void LayerGraph::set_output(const std::string& id) {
  if (!index_.count(id)) fail("LayerGraph: unknown output node '" + id + "'");
  output_id_ = id;
}

LayerGraph LayerGraph::build(std::vector<LayerSpec> specs, const std::string& output_id) {
  // Kahn topological sort; rejects cycles and dangling references.
  std::map<std::string, size_t> pos;
  for (size_t i = 0; i < specs.size(); ++i) {
    if (pos.count(specs[i].id)) fail("LayerGraph: duplicate node id '" + specs[i].id + "'");
    pos[specs[i].id] = i;
  }
  std::vector<int> indegree(specs.size(), 0);
  std::map<std::string, std::vector<size_t>> consumers;
  for (size_t i = 0; i < specs.size(); ++i) {
    for (const auto& in : specs[i].inputs) {
      if (!pos.count(in))
        fail("LayerGraph: node '" + specs[i].id + "' references unknown input '" + in + "'");
      indegree[i]++;
      consumers[in].push_back(i);
    }
  }
  std::vector<size_t> ready;
  for (size_t i = 0; i < specs.size(); ++i)
    if (indegree[i] == 0) ready.push_back(i);
  LayerGraph g;
  size_t emitted = 0;
  while (!ready.empty()) {
    // smallest original index first keeps the order deterministic
    auto it = std::min_element(ready.begin(), ready.end());
    const size_t i = *it;
    ready.erase(it);
    g.add(specs[i]);
    ++emitted;
    for (size_t c : consumers[specs[i].id])
      if (--indegree[c] == 0) ready.push_back(c);
  }
  if (emitted != specs.size()) fail("LayerGraph: cycle detected");
  g.set_output(output_id);
  g.validate();
  return g;
}

const LayerSpec& LayerGraph::layer(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail("LayerGraph: unknown node '" + id + "'");
  return layers_[it->second];
}

bool LayerGraph::has_layer(const std::string& id) const {
  return index_.count(id) != 0;
}

const std::string& LayerGraph::output_id() const {
  if (output_id_.empty()) fail("LayerGraph: no output node designated");
  return output_id_;
}

std::vector<std::string> LayerGraph::input_ids() const {
  std::vector<std::string> out;
  for (const auto& l : layers_)
    if (l.kind == LayerKind::input) out.push_back(l.id);
  return out;
}

int LayerGraph::channels_of(const std::string& id) const {
  const LayerSpec& l = layer(id);
  switch (l.kind) {
    case LayerKind::input:
    case LayerKind::conv:
    case LayerKind::conv_transpose:
      return l.out_channels;
    case LayerKind::concat: {
      int c = 0;
      for (const auto& in : l.inputs) c += channels_of(in);
      return c;
    }
    default:
      return channels_of(l.inputs.at(0));
  }
}

void LayerGraph::validate() const {
  if (layers_.empty()) fail("LayerGraph: empty graph");
  if (output_id_.empty()) fail("LayerGraph: no output node designated");
  for (const auto& l : layers_) {
    const size_t nin = l.inputs.size();
    switch (l.kind) {
      case LayerKind::input:
        if (nin != 0) fail("node '" + l.id + "': input nodes take no inputs");
        if (l.out_channels <= 0)
          fail("node '" + l.id + "': input channel count must be positive");
        break;
      case LayerKind::conv:
      case LayerKind::conv_transpose:
        if (nin != 1) fail("node '" + l.id + "': conv nodes take exactly one input");
        if (l.kernel < 1) fail("node '" + l.id + "': kernel extent must be >= 1");
        if (l.stride < 1) fail("node '" + l.id + "': stride must be >= 1");
        if (l.out_channels <= 0)
          fail("node '" + l.id + "': output channel count must be positive");
        if (l.kind == LayerKind::conv_transpose &&
            !(l.pad.left == l.pad.right && l.pad.top == l.pad.bottom &&
              l.pad.left == l.pad.top))
          fail("node '" + l.id + "': conv_transpose padding must be symmetric");
        break;
      case LayerKind::concat:
        if (nin < 1) fail("node '" + l.id + "': concat needs at least one input");
        break;
      case LayerKind::pointwise:
      case LayerKind::channel_softmax:
      case LayerKind::instance_norm:
        if (nin != 1) fail("node '" + l.id + "': takes exactly one input");
        break;
    }
  }
}

// --- text form -------------------------------------------------------------

namespace {

std::string pad_str(const Pad4& p) {
  std::ostringstream os;
  os << p.left << "," << p.right << "," << p.top << "," << p.bottom;
  return os.str();
}

Pad4 parse_pad(const std::string& s, int line_no) {
  Pad4 p{};
  int vals[4];
  std::stringstream ss(s);
  std::string tok;
  for (int i = 0; i < 4; ++i) {
    if (!std::getline(ss, tok, ','))
      fail("graph text line " + std::to_string(line_no) + ": bad pad '" + s + "'");
    vals[i] = std::stoi(tok);
  }
  p.left = vals[0];
  p.right = vals[1];
  p.top = vals[2];
  p.bottom = vals[3];
  return p;
}

LayerKind parse_kind(const std::string& s, int line_no) {
  if (s == "input") return LayerKind::input;
  if (s == "conv") return LayerKind::conv;
  if (s == "conv_transpose") return LayerKind::conv_transpose;
  if (s == "pointwise") return LayerKind::pointwise;
  if (s == "channel_softmax") return LayerKind::channel_softmax;
  if (s == "instance_norm") return LayerKind::instance_norm;
  if (s == "concat") return LayerKind::concat;
  fail("graph text line " + std::to_string(line_no) + ": unknown kind '" + s + "'");
  return LayerKind::input;
}

}  // namespace

std::string LayerGraph::to_text() const {
  std::ostringstream os;
  os << "# id kind k s pad(l,r,t,b) ch norm act inputs\n";
  for (const auto& l : layers_) {
    os << l.id << " " << to_string(l.kind) << " ";
    if (l.kind == LayerKind::conv || l.kind == LayerKind::conv_transpose)
      os << l.kernel << " " << l.stride << " " << pad_str(l.pad) << " ";
    else
      os << "- - - ";
    os << channels_of(l.id) << " " << to_string(l.norm) << " "
       << to_string(l.act, l.act_param) << " ";
    if (l.inputs.empty()) {
      os << "-";
    } else {
      for (size_t i = 0; i < l.inputs.size(); ++i)
        os << (i ? "," : "") << l.inputs[i];
    }
    os << "\n";
  }
  os << "output " << output_id() << "\n";
  return os.str();
}

LayerGraph LayerGraph::from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<LayerSpec> specs;
  std::string output_id;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    std::istringstream ls(line);
    std::string tok0;
    ls >> tok0;
    if (tok0 == "output") {
      if (!(ls >> output_id))
        fail("graph text line " + std::to_string(line_no) + ": output needs a node id");
      continue;
    }
    LayerSpec spec;
    spec.id = tok0;
    std::string kind, k, s, pad, ch, norm, act, inputs;
    if (!(ls >> kind >> k >> s >> pad >> ch >> norm >> act >> inputs))
      fail("graph text line " + std::to_string(line_no) +
           ": expected 9 columns (id kind k s pad ch norm act inputs)");
    spec.kind = parse_kind(kind, line_no);
    if (spec.kind == LayerKind::conv || spec.kind == LayerKind::conv_transpose) {
      spec.kernel = std::stoi(k);
      spec.stride = std::stoi(s);
      spec.pad = parse_pad(pad, line_no);
    }
    if (ch != "-") spec.out_channels = std::stoi(ch);
    if (norm == "instance")
      spec.norm = NormKind::instance;
    else if (norm != "none" && norm != "-")
      fail("graph text line " + std::to_string(line_no) + ": unknown norm '" + norm + "'");
    if (act == "relu") {
      spec.act = ActKind::relu;
    } else if (act == "sigmoid") {
      spec.act = ActKind::sigmoid;
    } else if (act == "softmax") {
      spec.act = ActKind::softmax;
    } else if (act.rfind("leaky_relu", 0) == 0) {
      spec.act = ActKind::leaky_relu;
      const auto colon = act.find(':');
      spec.act_param = colon == std::string::npos ? 0.2 : std::stod(act.substr(colon + 1));
    } else if (act != "none" && act != "-") {
      fail("graph text line " + std::to_string(line_no) + ": unknown act '" + act + "'");
    }
    if (inputs != "-") {
      std::stringstream ss(inputs);
      std::string tok;
      while (std::getline(ss, tok, ',')) spec.inputs.push_back(tok);
    }
    specs.push_back(std::move(spec));
  }
  if (output_id.empty()) fail("graph text: missing 'output <id>' line");
  LayerGraph g = LayerGraph::build(std::move(specs), output_id);
  // concat/pointwise channel columns are derived; verify they round-trip
  for (const auto& l : g.layers()) {
    if (l.kind == LayerKind::concat || l.kind == LayerKind::pointwise ||
        l.kind == LayerKind::channel_softmax || l.kind == LayerKind::instance_norm) {
      if (l.out_channels != 0 && l.out_channels != g.channels_of(l.id))
        fail("graph text: node '" + l.id + "' channel column " +
             std::to_string(l.out_channels) + " does not match derived " +
             std::to_string(g.channels_of(l.id)));
    }
  }
  return g;
}

// --- parameters -------------------------------------------------------------

namespace {

Shape kernel_shape(const LayerGraph& g, const LayerSpec& l) {
  const int cin = g.channels_of(l.inputs.at(0));
  if (l.kind == LayerKind::conv) return {l.out_channels, cin, l.kernel, l.kernel};
  return {cin, l.out_channels, l.kernel, l.kernel};  // conv_transpose
}

}  // namespace

ModelParams ModelParams::init(const LayerGraph& g, SeededRng& rng, double stddev) {
  ModelParams p;
  for (const auto& l : g.layers()) {
    if (l.kind != LayerKind::conv && l.kind != LayerKind::conv_transpose) continue;
    const Shape ks = kernel_shape(g, l);
    Tensor kernel = Tensor::zeros(ks);
    for (int64_t i = 0; i < kernel.size(); ++i)
      kernel.data()[i] = stddev * rng.normal();
    p.by_layer_[l.id] = LayerParams{kernel, Tensor::zeros({l.out_channels})};
  }
  return p;
}

ModelParams ModelParams::constant(const LayerGraph& g, double kernel_value) {
  ModelParams p;
  for (const auto& l : g.layers()) {
    if (l.kind != LayerKind::conv && l.kind != LayerKind::conv_transpose) continue;
    p.by_layer_[l.id] = LayerParams{Tensor::full(kernel_shape(g, l), kernel_value),
                                    Tensor::zeros({l.out_channels})};
  }
  return p;
}

LayerParams& ModelParams::at(const std::string& layer_id) {
  auto it = by_layer_.find(layer_id);
  if (it == by_layer_.end())
    fail("ModelParams: no parameters for layer '" + layer_id + "'");
  return it->second;
}

const LayerParams& ModelParams::at(const std::string& layer_id) const {
  auto it = by_layer_.find(layer_id);
  if (it == by_layer_.end())
    fail("ModelParams: no parameters for layer '" + layer_id + "'");
  return it->second;
}

int64_t ModelParams::parameter_count() const {
  int64_t n = 0;
  for (const auto& [id, lp] : by_layer_) n += lp.kernel.size() + lp.bias.size();
  return n;
}

void ModelParams::watch_all(Tape& tape) {
  for (auto& [id, lp] : by_layer_) {
    tape.watch(lp.kernel);
    tape.watch(lp.bias);
  }
}

// --- execution -------------------------------------------------------------

Tensor forward(const LayerGraph& g, const ModelParams& params,
               const std::map<std::string, Tensor>& inputs) {
  g.validate();
  std::map<std::string, Tensor> values;
  for (const auto& l : g.layers()) {
    try {
      Tensor out;
      switch (l.kind) {
        case LayerKind::input: {
          auto it = inputs.find(l.id);
          if (it == inputs.end()) fail("no tensor supplied for input node");
          if (it->second.rank() != 3 || it->second.shape()[0] != l.out_channels)
            fail("input tensor " + shape_str(it->second.shape()) +
                 " does not match declared channels " + std::to_string(l.out_channels));
          out = it->second;
          break;
        }
        case LayerKind::conv: {
          const auto& lp = params.at(l.id);
          out = conv2d(values.at(l.inputs[0]), lp.kernel, lp.bias, l.stride, l.pad);
          break;
        }
        case LayerKind::conv_transpose: {
          const auto& lp = params.at(l.id);
          out = conv_transpose2d(values.at(l.inputs[0]), lp.kernel, lp.bias,
                                 l.stride, l.pad.left);
          break;
        }
        case LayerKind::concat: {
          std::vector<Tensor> ins;
          for (const auto& in : l.inputs) ins.push_back(values.at(in));
          out = concat_channels(ins);
          break;
        }
        case LayerKind::pointwise:
          out = values.at(l.inputs[0]);
          break;
        case LayerKind::channel_softmax:
          out = channel_softmax(values.at(l.inputs[0]));
          break;
        case LayerKind::instance_norm:
          out = instance_norm(values.at(l.inputs[0]));
          break;
      }
      if (l.kind != LayerKind::input && l.kind != LayerKind::channel_softmax &&
          l.kind != LayerKind::instance_norm) {
        if (l.norm == NormKind::instance) out = instance_norm(out);
        switch (l.act) {
          case ActKind::none: break;
          case ActKind::relu: out = relu(out); break;
          case ActKind::leaky_relu: out = leaky_relu(out, l.act_param); break;
          case ActKind::sigmoid: out = sigmoid(out); break;
          case ActKind::softmax: out = channel_softmax(out); break;
        }
      }
      values[l.id] = out;
    } catch (const std::exception& e) {
      throw std::invalid_argument("node '" + l.id + "': " + e.what());
    }
  }
  return values.at(g.output_id());
}

Tensor forward(const LayerGraph& g, const ModelParams& params, const Tensor& input) {
  const auto ids = g.input_ids();
  if (ids.size() != 1)
    fail("forward: graph has " + std::to_string(ids.size()) +
         " input nodes; supply a tensor per node");
  return forward(g, params, std::map<std::string, Tensor>{{ids[0], input}});
}

}  // namespace spgan
