#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "isac/ad/adam.hpp"
#include "isac/ad/tensor.hpp"
#include "isac/hetgraph.hpp"
#include "isac/metrics.hpp"
#include "isac/tape_metrics.hpp"

namespace isac {

inline constexpr int kModelFormatVersion = 1;

struct GnnHyperparams {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  double init_scale = 1.0;
  std::uint64_t seed = 1;
  /// Adds bias vectors to the encoders, the aggregation maps and the output head.
  bool bias = false;

  std::size_t head_dim() const noexcept { return hidden / heads; }
  /// Throws ConfigError unless layers >= 1, heads >= 1 and heads divides hidden.
  void validate() const;
};

/// Weights are stored input-major (rows = fan-in) and applied to row-vector
/// states as y = x W. Per layer l the parameters are
///   l{l}.wq            d x d, shared by all target types
///   l{l}.wk.{type}     d x d, keyed by source type
///   l{l}.wv.{type}     d x d, keyed by source type
///   l{l}.watt.{type}   d_head x d_head, keyed by source type, shared by heads
///   l{l}.wmsg.{type}   d_head x d_head, keyed by source type, shared by heads
///   l{l}.wagg.{type}   d x d, keyed by target type
/// plus encoders enc.{type} (packed feature width x d) and the output head
/// out (d x 2(K + 1), interleaved re/im per stream). Head h owns columns
/// [h d_head, (h + 1) d_head) of the query, key and value projections.
struct GnnModel {
  GnnHyperparams hp;
  GraphDims dims;
  ad::ParameterList params;
  /// Scenario hash of the dataset the model was trained on; empty if untrained.
  std::string config_hash;
  /// Free-form experiment record (training settings, operating point, ...).
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  std::size_t index_of(std::string_view name) const;
  const ad::Parameter& param(std::string_view name) const { return params.at(index_of(name)); }
};

/// Weights uniform in +-init_scale / sqrt(fan_in), drawn in parameter order
/// from SplitMix64(hp.seed). Biases start at zero.
GnnModel init_model(const GnnHyperparams& hp, const GraphDims& dims);

/// Tape leaves aliasing the parameter buffers, in parameter order.
std::vector<ad::Tensor> as_leaves(const ad::ParameterList& params, ad::Tape& tape);
std::vector<ad::Tensor> as_constants(const ad::ParameterList& params);

/// Node states per type (count(type) x d).
using NodeStates = std::array<ad::Tensor, kNodeTypes>;

/// Attention weights of one layer: attention[target][head] is
/// count(target) x (sum of linked source counts), sources concatenated in
/// tAP, rAP, UE order.
using LayerAttention = std::array<std::vector<ad::Tensor>, kNodeTypes>;

NodeStates encode_inputs(const GnnModel& model, std::span<const ad::Tensor> w, const HeteroGraph& graph);

NodeStates layer_forward(const GnnModel& model, std::span<const ad::Tensor> w, std::size_t layer,
                         const HeteroGraph& graph, const NodeStates& states, LayerAttention* attention = nullptr);

/// Linear head on tAP states, scaled by sqrt(p_max), then tape_power_projection.
TapeBeamformer output_beamformers(const GnnModel& model, std::span<const ad::Tensor> w, const ad::Tensor& tap_states,
                                  double p_max);

/// Encoders, every layer, the output head and power projection.
TapeBeamformer forward(const GnnModel& model, std::span<const ad::Tensor> w, const HeteroGraph& graph, double p_max);

/// Untracked forward producing complex beamformers.
BeamformerSet infer(const GnnModel& model, const HeteroGraph& graph, double p_max);

nlohmann::ordered_json model_to_json(const GnnModel& model);
GnnModel model_from_json(const nlohmann::json& j);
void save_model(const GnnModel& model, const std::filesystem::path& path);
/// Throws IoError when the file is missing or malformed.
GnnModel load_model(const std::filesystem::path& path);

}  // namespace isac
