#include "isac/sacgnn.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "isac/ad/ops.hpp"
#include "isac/errors.hpp"
#include "isac/fileio.hpp"
#include "isac/rng.hpp"

namespace isac {

using ad::Shape;
using ad::Tensor;

void GnnHyperparams::validate() const {
  if (layers < 1) throw ConfigError("gnn: layers must be >= 1");
  if (heads < 1) throw ConfigError("gnn: heads must be >= 1");
  if (hidden < 1 || hidden % heads != 0) throw ConfigError("gnn: hidden width must be a positive multiple of heads");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ConfigError("gnn: init_scale must be >= 0");
}

std::size_t GnnModel::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name == name) return i;
  }
  throw std::out_of_range("GnnModel: no parameter named " + std::string(name));
}

namespace {

std::string layer_name(std::size_t l, std::string_view what) { return "l" + std::to_string(l) + "." + std::string(what); }

std::string typed(std::string_view base, NodeType t) { return std::string(base) + "." + std::string(type_name(t)); }

/// Parameter layout, independent of values; every shape check goes through it.
ad::ParameterList layout(const GnnHyperparams& hp, const GraphDims& dims) {
  ad::ParameterList out;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    out.push_back({std::move(name), {rows, cols}, std::make_shared<std::vector<double>>(rows * cols, 0.0)});
  };
  const std::size_t d = hp.hidden;
  const std::size_t dh = hp.head_dim();
  for (NodeType t : kAllNodeTypes) {
    add(typed("enc", t), dims.packed_dim(t), d);
    if (hp.bias) add(typed("enc", t) + ".b", 1, d);
  }
  for (std::size_t l = 0; l < hp.layers; ++l) {
    add(layer_name(l, "wq"), d, d);
    for (NodeType t : kAllNodeTypes) add(typed(layer_name(l, "wk"), t), d, d);
    for (NodeType t : kAllNodeTypes) add(typed(layer_name(l, "wv"), t), d, d);
    for (NodeType t : kAllNodeTypes) add(typed(layer_name(l, "watt"), t), dh, dh);
    for (NodeType t : kAllNodeTypes) add(typed(layer_name(l, "wmsg"), t), dh, dh);
    for (NodeType t : kAllNodeTypes) {
      add(typed(layer_name(l, "wagg"), t), d, d);
      if (hp.bias) add(typed(layer_name(l, "wagg"), t) + ".b", 1, d);
    }
  }
  add("out", d, 2 * (dims.users + 1));
  if (hp.bias) add("out.b", 1, 2 * (dims.users + 1));
  return out;
}

bool is_bias(const std::string& name) { return name.size() > 2 && name.ends_with(".b"); }

/// Weight lookup by name against the span handed to forward().
class Weights {
 public:
  Weights(const GnnModel& model, std::span<const Tensor> w) : model_(model), w_(w) {
    if (w.size() != model.params.size()) {
      throw std::invalid_argument("sacgnn: expected " + std::to_string(model.params.size()) + " weight tensors, got " +
                                  std::to_string(w.size()));
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i].shape() != model.params[i].shape) {
        throw std::invalid_argument("sacgnn: weight " + model.params[i].name + " has shape " +
                                    ad::to_string(w[i].shape()) + ", expected " +
                                    ad::to_string(model.params[i].shape));
      }
    }
  }
  const Tensor& operator()(const std::string& name) const { return w_[model_.index_of(name)]; }
  const Tensor* optional(const std::string& name) const {
    for (std::size_t i = 0; i < w_.size(); ++i) {
      if (model_.params[i].name == name) return &w_[i];
    }
    return nullptr;
  }

 private:
  const GnnModel& model_;
  std::span<const Tensor> w_;
};

Tensor affine(const Tensor& x, const Weights& w, const std::string& name) {
  Tensor y = ad::matmul(x, w(name));
  if (const Tensor* b = w.optional(name + ".b")) y = ad::add(y, *b);
  return y;
}

void check_dims(const GnnModel& model, const HeteroGraph& graph) {
  if (!(model.dims == graph.dims)) throw std::invalid_argument("sacgnn: graph dimensions differ from model dimensions");
}

}  // namespace

GnnModel init_model(const GnnHyperparams& hp, const GraphDims& dims) {
  hp.validate();
  GnnModel model;
  model.hp = hp;
  model.dims = dims;
  model.params = layout(hp, dims);
  SplitMix64 rng(hp.seed);
  for (ad::Parameter& p : model.params) {
    if (is_bias(p.name)) continue;
    const double bound = hp.init_scale / std::sqrt(static_cast<double>(p.shape.rows));
    for (double& v : *p.values) v = rng.uniform(-bound, bound);
  }
  return model;
}

std::vector<Tensor> as_leaves(const ad::ParameterList& params, ad::Tape& tape) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const ad::Parameter& p : params) out.push_back(tape.variable(p.shape, p.values));
  return out;
}

std::vector<Tensor> as_constants(const ad::ParameterList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const ad::Parameter& p : params) out.push_back(Tensor::constant(p.shape, ad::Buffer(p.values)));
  return out;
}

NodeStates encode_inputs(const GnnModel& model, std::span<const Tensor> w, const HeteroGraph& graph) {
  check_dims(model, graph);
  const Weights weights(model, w);
  NodeStates out;
  for (NodeType t : kAllNodeTypes) {
    const std::size_t n = graph.dims.count(t);
    const std::size_t width = graph.dims.packed_dim(t);
    const auto& f = graph.features[type_index(t)];
    if (f.size() != n * width) {
      throw std::invalid_argument("encode_inputs: " + std::string(type_name(t)) + " features have wrong size");
    }
    out[type_index(t)] = affine(Tensor::constant({n, width}, f), weights, typed("enc", t));
  }
  return out;
}

NodeStates layer_forward(const GnnModel& model, std::span<const Tensor> w, std::size_t l, const HeteroGraph& graph,
                         const NodeStates& states, LayerAttention* attention) {
  check_dims(model, graph);
  if (l >= model.hp.layers) throw std::out_of_range("layer_forward: layer index out of range");
  const Weights weights(model, w);
  const std::size_t d = model.hp.hidden;
  const std::size_t dh = model.hp.head_dim();
  const std::size_t heads = model.hp.heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (NodeType t : kAllNodeTypes) {
    if (states[type_index(t)].shape() != Shape{graph.dims.count(t), d}) {
      throw std::invalid_argument("layer_forward: " + std::string(type_name(t)) + " states must be count x d");
    }
  }

  // Keys, values and per-head messages depend only on the source type.
  std::array<Tensor, kNodeTypes> keys, values;
  for (NodeType s : kAllNodeTypes) {
    keys[type_index(s)] = ad::matmul(states[type_index(s)], weights(typed(layer_name(l, "wk"), s)));
    values[type_index(s)] = ad::matmul(states[type_index(s)], weights(typed(layer_name(l, "wv"), s)));
  }
  const Tensor& wq = weights(layer_name(l, "wq"));

  NodeStates next;
  for (NodeType t : kAllNodeTypes) {
    const std::size_t nt = graph.dims.count(t);
    const Tensor& g = states[type_index(t)];
    const Tensor query = ad::matmul(g, wq);

    struct Block {
      NodeType source;
      std::size_t n;
      std::optional<Tensor> mask;
    };
    std::vector<Block> blocks;
    for (NodeType s : kAllNodeTypes) {
      const std::size_t ns = graph.dims.count(s);
      if (ns == 0 || nt == 0) continue;
      const std::vector<char> m = graph.block_mask(t, s);
      std::size_t links = 0;
      for (char c : m) links += c != 0;
      if (links == 0) continue;
      Block b{s, ns, std::nullopt};
      if (links != m.size()) {
        std::vector<double> additive(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
          additive[i] = m[i] ? 0.0 : -std::numeric_limits<double>::infinity();
        }
        b.mask = Tensor::constant({nt, ns}, std::move(additive));
      }
      blocks.push_back(std::move(b));
    }
    if (blocks.empty()) {
      throw std::invalid_argument("layer_forward: " + std::string(type_name(t)) + " nodes have no neighbors");
    }

    std::vector<Tensor> head_out;
    head_out.reserve(heads);
    if (attention) attention->at(type_index(t)).clear();
    for (std::size_t h = 0; h < heads; ++h) {
      const Tensor q_h = ad::slice_cols(query, h * dh, (h + 1) * dh);
      std::vector<Tensor> scores;
      std::vector<Tensor> messages;
      for (const Block& b : blocks) {
        const std::size_t si = type_index(b.source);
        const Tensor k_h = ad::slice_cols(keys[si], h * dh, (h + 1) * dh);
        const Tensor kw = ad::matmul(k_h, weights(typed(layer_name(l, "watt"), b.source)));
        Tensor score = ad::scale(ad::matmul(q_h, ad::transpose(kw)), inv_sqrt_dh);
        if (b.mask) score = ad::add(score, *b.mask);
        scores.push_back(std::move(score));
        const Tensor v_h = ad::slice_cols(values[si], h * dh, (h + 1) * dh);
        messages.push_back(ad::matmul(v_h, weights(typed(layer_name(l, "wmsg"), b.source))));
      }
      const Tensor att = ad::softmax(scores.size() == 1 ? scores.front() : ad::concat(scores, 1), 1);
      if (attention) attention->at(type_index(t)).push_back(att);
      Tensor agg;
      std::size_t offset = 0;
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const Tensor a = blocks.size() == 1 ? att : ad::slice_cols(att, offset, offset + blocks[bi].n);
        offset += blocks[bi].n;
        const Tensor part = ad::matmul(a, messages[bi]);
        agg = bi == 0 ? part : ad::add(agg, part);
      }
      head_out.push_back(std::move(agg));
    }
    const Tensor joined = heads == 1 ? head_out.front() : ad::concat(head_out, 1);
    const Tensor update = affine(ad::relu(joined), weights, typed(layer_name(l, "wagg"), t));
    next[type_index(t)] = ad::add(update, g);
  }
  return next;
}

TapeBeamformer output_beamformers(const GnnModel& model, std::span<const Tensor> w, const Tensor& tap_states,
                                  double p_max) {
  const Weights weights(model, w);
  const std::size_t streams = model.dims.users + 1;
  if (tap_states.shape() != Shape{model.dims.count(NodeType::tap), model.hp.hidden}) {
    throw std::invalid_argument("output_beamformers: tAP states must be count x d");
  }
  // sqrt(p_max) puts an O(1) head output on the scale of the power budget.
  const Tensor o = ad::scale(affine(tap_states, weights, "out"), std::sqrt(p_max));
  std::vector<double> sel_re(2 * streams * streams, 0.0), sel_im(2 * streams * streams, 0.0);
  for (std::size_t s = 0; s < streams; ++s) {
    sel_re[(2 * s) * streams + s] = 1.0;
    sel_im[(2 * s + 1) * streams + s] = 1.0;
  }
  const TapeBeamformer raw{ad::matmul(o, Tensor::constant({2 * streams, streams}, std::move(sel_re))),
                           ad::matmul(o, Tensor::constant({2 * streams, streams}, std::move(sel_im)))};
  return tape_power_projection(raw, p_max, model.dims.n_tx);
}

TapeBeamformer forward(const GnnModel& model, std::span<const Tensor> w, const HeteroGraph& graph, double p_max) {
  NodeStates states = encode_inputs(model, w, graph);
  for (std::size_t l = 0; l < model.hp.layers; ++l) states = layer_forward(model, w, l, graph, states);
  return output_beamformers(model, w, states[type_index(NodeType::tap)], p_max);
}

BeamformerSet infer(const GnnModel& model, const HeteroGraph& graph, double p_max) {
  const std::vector<Tensor> w = as_constants(model.params);
  return from_tape(forward(model, w, graph, p_max), model.dims.n_tx);
}

nlohmann::ordered_json model_to_json(const GnnModel& model) {
  nlohmann::ordered_json j;
  j["format_version"] = kModelFormatVersion;
  j["hyperparams"] = {{"layers", model.hp.layers}, {"hidden", model.hp.hidden},     {"heads", model.hp.heads},
                      {"init_scale", model.hp.init_scale}, {"seed", model.hp.seed}, {"bias", model.hp.bias}};
  j["dims"] = {{"n_tx", model.dims.n_tx},
               {"n_rx", model.dims.n_rx},
               {"antennas", model.dims.antennas},
               {"users", model.dims.users}};
  auto weights = nlohmann::ordered_json::object();
  for (const ad::Parameter& p : model.params) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < p.shape.rows; ++r) {
      auto row = nlohmann::ordered_json::array();
      for (std::size_t c = 0; c < p.shape.cols; ++c) row.push_back((*p.values)[r * p.shape.cols + c]);
      rows.push_back(std::move(row));
    }
    weights[p.name] = std::move(rows);
  }
  j["weights"] = std::move(weights);
  j["config_hash"] = model.config_hash;
  j["seed"] = model.hp.seed;
  j["metadata"] = model.metadata;
  return j;
}

GnnModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw IoError("model: unsupported format_version " + j.at("format_version").dump());
    }
    const auto& h = j.at("hyperparams");
    GnnHyperparams hp;
    hp.layers = h.at("layers").get<std::size_t>();
    hp.hidden = h.at("hidden").get<std::size_t>();
    hp.heads = h.at("heads").get<std::size_t>();
    hp.init_scale = h.at("init_scale").get<double>();
    hp.seed = h.at("seed").get<std::uint64_t>();
    hp.bias = h.value("bias", false);
    hp.validate();
    const auto& dj = j.at("dims");
    GraphDims dims{dj.at("n_tx").get<std::size_t>(), dj.at("n_rx").get<std::size_t>(),
                   dj.at("antennas").get<std::size_t>(), dj.at("users").get<std::size_t>()};
    GnnModel model;
    model.hp = hp;
    model.dims = dims;
    model.params = layout(hp, dims);
    const auto& wj = j.at("weights");
    if (wj.size() != model.params.size()) throw IoError("model: weight count does not match hyperparameters");
    for (ad::Parameter& p : model.params) {
      const auto& rows = wj.at(p.name);
      if (rows.size() != p.shape.rows) throw IoError("model: weight " + p.name + " has wrong row count");
      std::size_t k = 0;
      for (const auto& row : rows) {
        if (row.size() != p.shape.cols) throw IoError("model: weight " + p.name + " has wrong column count");
        for (const auto& v : row) {
          const double x = v.get<double>();
          if (!std::isfinite(x)) throw IoError("model: weight " + p.name + " is not finite");
          (*p.values)[k++] = x;
        }
      }
    }
    model.config_hash = j.value("config_hash", std::string());
    if (j.contains("metadata")) model.metadata = j.at("metadata");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model: malformed JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(std::string("model: ") + e.what());
  }
}

void save_model(const GnnModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model).dump(1) + "\n");
}

GnnModel load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace isac
