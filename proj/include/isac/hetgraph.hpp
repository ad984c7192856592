#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "isac/config.hpp"
#include "isac/geometry.hpp"

namespace isac {

enum class NodeType : int { tap = 0, rap = 1, ue = 2 };
inline constexpr std::size_t kNodeTypes = 3;
inline constexpr std::array<NodeType, kNodeTypes> kAllNodeTypes{NodeType::tap, NodeType::rap, NodeType::ue};

std::string_view type_name(NodeType t) noexcept;
inline std::size_t type_index(NodeType t) noexcept { return static_cast<std::size_t>(t); }

struct NodeRef {
  NodeType type = NodeType::tap;
  std::size_t index = 0;
  bool operator==(const NodeRef&) const = default;
};

/// Interleaved (re, im) packing.
std::vector<double> pack_complex(std::span<const cplx> v);
/// Throws std::invalid_argument on odd length.
std::vector<cplx> unpack_complex(std::span<const double> v);

/// Per-type node counts and feature widths, the only things a model needs to
/// know about a scenario.
struct GraphDims {
  std::size_t n_tx = 0, n_rx = 0, antennas = 0, users = 0;

  std::size_t count(NodeType t) const noexcept;
  /// Raw complex feature width per node (tAP: K + N_R M, rAP/UE: N_T M).
  std::size_t complex_dim(NodeType t) const noexcept;
  std::size_t packed_dim(NodeType t) const noexcept { return 2 * complex_dim(t); }
  std::size_t edge_count() const noexcept;

  bool operator==(const GraphDims&) const = default;
};

GraphDims graph_dims(const SystemConfig& config);

/// Typed graph of one sample. tAP node t = i * M + m is antenna m of transmit
/// AP i (all 0-based), rAP node r = j * M + m likewise, UE node k is user k.
/// tAP nodes link to every UE and every rAP node; nothing else is linked.
struct HeteroGraph {
  GraphDims dims;
  /// Row-major packed features per type: features[type][node * packed_dim + c].
  std::array<std::vector<double>, kNodeTypes> features;
  /// Neighbors per type per node.
  std::array<std::vector<std::vector<NodeRef>>, kNodeTypes> adjacency;

  std::span<const NodeRef> neighbors(NodeRef node) const {
    return adjacency[type_index(node.type)].at(node.index);
  }
  std::span<const double> feature(NodeRef node) const;
  std::size_t edge_count() const;
  /// Dense 0/1 matrix (count(target) x count(source)), row-major.
  std::vector<char> block_mask(NodeType target, NodeType source) const;
};

/// Edges plus initial features. tAP (i, m) carries
///   [h_{i,0}(m) .. h_{i,K-1}(m), row m of Atilde_{i,0}, .., row m of Atilde_{i,N_R-1}],
/// rAP (j, m) carries column m of Atilde_{0,j} .. Atilde_{N_T-1,j}, and UE k
/// carries h_{0,k} .. h_{N_T-1,k} concatenated.
HeteroGraph build_graph(const SystemConfig& config, const ChannelSet& channels);

/// The feature half of build_graph, for callers that already own a graph.
void init_features(HeteroGraph& graph, const ChannelSet& channels);

}  // namespace isac
