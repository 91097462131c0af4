#pragma once

#include <map>
#include <string>
#include <vector>

#include "spgan/ops.hpp"
#include "spgan/rng.hpp"
#include "spgan/tensor.hpp"

namespace spgan {

enum class LayerKind {
  input,
  conv,
  conv_transpose,
  pointwise,
  channel_softmax,
  instance_norm,
  concat,
};

enum class NormKind { none, instance };
enum class ActKind { none, relu, leaky_relu, sigmoid, softmax };

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::input;
  int kernel = 0;
  int stride = 1;
  Pad4 pad{};
  int out_channels = 0;  // input nodes: channel count of the fed tensor
  NormKind norm = NormKind::none;
  ActKind act = ActKind::none;
  double act_param = 0.0;  // leaky_relu slope
  std::vector<std::string> inputs;
};

// DAG of layer specifications in topological order, with one designated
// output node. Immutable once validated; construction is pure.
class LayerGraph {
 public:
  // Append a node; its inputs must already be present.
  void add(LayerSpec spec);
  void set_output(const std::string& id);

  // Build from nodes in arbitrary order (topologically sorts; cycles and
  // dangling references are rejected).
  static LayerGraph build(std::vector<LayerSpec> specs, const std::string& output_id);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const LayerSpec& layer(const std::string& id) const;
  bool has_layer(const std::string& id) const;
  const std::string& output_id() const;
  std::vector<std::string> input_ids() const;

  // Channels leaving a node (concat sums its inputs).
  int channels_of(const std::string& id) const;

  // Full structural validation: single designated output, channel
  // bookkeeping, argument counts per kind.
  void validate() const;

  // One node per line: id kind k s pad ch norm act inputs. Stable format,
  // consumed by the analyze-rf CLI; see README for the grammar.
  std::string to_text() const;
  static LayerGraph from_text(const std::string& text);

 private:
  std::vector<LayerSpec> layers_;
  std::map<std::string, size_t> index_;
  std::string output_id_;
};

// Kernel + bias per conv / conv_transpose layer.
struct LayerParams {
  Tensor kernel;
  Tensor bias;
};

class ModelParams {
 public:
  // normal(0, stddev) kernels, zero biases, drawn in topological order.
  static ModelParams init(const LayerGraph& g, SeededRng& rng, double stddev = 0.02);
  // All-constant positive kernels, zero biases (receptive-field support mode).
  static ModelParams constant(const LayerGraph& g, double kernel_value);

  LayerParams& at(const std::string& layer_id);
  const LayerParams& at(const std::string& layer_id) const;
  std::map<std::string, LayerParams>& entries() { return by_layer_; }
  const std::map<std::string, LayerParams>& entries() const { return by_layer_; }

  int64_t parameter_count() const;
  void watch_all(Tape& tape);

 private:
  std::map<std::string, LayerParams> by_layer_;
};

// Topological execution of the graph on the given inputs (one tensor per
// input node). Gradients flow through any tensors already watched on a
// live tape. Shape errors name the offending node.
Tensor forward(const LayerGraph& g, const ModelParams& params,
               const std::map<std::string, Tensor>& inputs);

// Single-input convenience.
Tensor forward(const LayerGraph& g, const ModelParams& params, const Tensor& input);

const char* to_string(LayerKind k);
const char* to_string(NormKind n);
std::string to_string(ActKind a, double param);

}  // namespace spgan
