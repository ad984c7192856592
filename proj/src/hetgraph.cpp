#include "isac/hetgraph.hpp"

#include <stdexcept>

namespace isac {

std::string_view type_name(NodeType t) noexcept {
  switch (t) {
    case NodeType::tap: return "tap";
    case NodeType::rap: return "rap";
    case NodeType::ue: return "ue";
  }
  return "?";
}

std::vector<double> pack_complex(std::span<const cplx> v) {
  std::vector<double> out;
  out.reserve(2 * v.size());
  for (const cplx& z : v) {
    out.push_back(z.real());
    out.push_back(z.imag());
  }
  return out;
}

std::vector<cplx> unpack_complex(std::span<const double> v) {
  if (v.size() % 2 != 0) throw std::invalid_argument("unpack_complex: odd length " + std::to_string(v.size()));
  std::vector<cplx> out(v.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v[2 * i], v[2 * i + 1]};
  return out;
}

std::size_t GraphDims::count(NodeType t) const noexcept {
  switch (t) {
    case NodeType::tap: return n_tx * antennas;
    case NodeType::rap: return n_rx * antennas;
    case NodeType::ue: return users;
  }
  return 0;
}

std::size_t GraphDims::complex_dim(NodeType t) const noexcept {
  switch (t) {
    case NodeType::tap: return users + n_rx * antennas;
    case NodeType::rap:
    case NodeType::ue: return n_tx * antennas;
  }
  return 0;
}

std::size_t GraphDims::edge_count() const noexcept {
  return count(NodeType::tap) * (users + count(NodeType::rap));
}

GraphDims graph_dims(const SystemConfig& config) {
  return {config.n_tx, config.n_rx, config.antennas(), config.users};
}

std::span<const double> HeteroGraph::feature(NodeRef node) const {
  const std::size_t w = dims.packed_dim(node.type);
  const auto& f = features[type_index(node.type)];
  if ((node.index + 1) * w > f.size()) throw std::out_of_range("HeteroGraph::feature: node index out of range");
  return std::span<const double>(f).subspan(node.index * w, w);
}

std::size_t HeteroGraph::edge_count() const {
  std::size_t degree_sum = 0;
  for (const auto& per_type : adjacency) {
    for (const auto& n : per_type) degree_sum += n.size();
  }
  return degree_sum / 2;
}

std::vector<char> HeteroGraph::block_mask(NodeType target, NodeType source) const {
  const std::size_t nt = dims.count(target);
  const std::size_t ns = dims.count(source);
  std::vector<char> mask(nt * ns, 0);
  const auto& adj = adjacency[type_index(target)];
  for (std::size_t t = 0; t < nt; ++t) {
    for (const NodeRef& s : adj[t]) {
      if (s.type == source) mask[t * ns + s.index] = 1;
    }
  }
  return mask;
}

namespace {

void check_channels(const GraphDims& d, const ChannelSet& ch) {
  if (ch.n_tx != d.n_tx || ch.n_rx != d.n_rx || ch.antennas != d.antennas || ch.users != d.users ||
      ch.h.size() != d.n_tx * d.users || ch.atilde.size() != d.n_tx * d.n_rx) {
    throw std::invalid_argument("build_graph: channel set does not match config dimensions");
  }
  for (const CVec& h : ch.h) {
    if (static_cast<std::size_t>(h.size()) != d.antennas) throw std::invalid_argument("build_graph: bad h length");
  }
  for (const CMat& a : ch.atilde) {
    if (static_cast<std::size_t>(a.rows()) != d.antennas || static_cast<std::size_t>(a.cols()) != d.antennas) {
      throw std::invalid_argument("build_graph: bad Atilde shape");
    }
  }
}

}  // namespace

void init_features(HeteroGraph& g, const ChannelSet& ch) {
  const GraphDims& d = g.dims;
  check_channels(d, ch);
  const std::size_t M = d.antennas;
  const auto at = [](std::size_t x) { return static_cast<Eigen::Index>(x); };
  std::vector<cplx> row;

  auto& tap = g.features[type_index(NodeType::tap)];
  tap.clear();
  tap.reserve(d.count(NodeType::tap) * d.packed_dim(NodeType::tap));
  for (std::size_t i = 0; i < d.n_tx; ++i) {
    for (std::size_t m = 0; m < M; ++m) {
      row.clear();
      for (std::size_t k = 0; k < d.users; ++k) row.push_back(ch.h_at(i, k)(at(m)));
      for (std::size_t j = 0; j < d.n_rx; ++j) {
        const CMat& a = ch.atilde_at(i, j);
        for (std::size_t n = 0; n < M; ++n) row.push_back(a(at(m), at(n)));
      }
      const auto packed = pack_complex(row);
      tap.insert(tap.end(), packed.begin(), packed.end());
    }
  }

  auto& rap = g.features[type_index(NodeType::rap)];
  rap.clear();
  rap.reserve(d.count(NodeType::rap) * d.packed_dim(NodeType::rap));
  for (std::size_t j = 0; j < d.n_rx; ++j) {
    for (std::size_t m = 0; m < M; ++m) {
      row.clear();
      for (std::size_t i = 0; i < d.n_tx; ++i) {
        const CMat& a = ch.atilde_at(i, j);
        for (std::size_t n = 0; n < M; ++n) row.push_back(a(at(n), at(m)));
      }
      const auto packed = pack_complex(row);
      rap.insert(rap.end(), packed.begin(), packed.end());
    }
  }

  auto& ue = g.features[type_index(NodeType::ue)];
  ue.clear();
  ue.reserve(d.count(NodeType::ue) * d.packed_dim(NodeType::ue));
  for (std::size_t k = 0; k < d.users; ++k) {
    row.clear();
    for (std::size_t i = 0; i < d.n_tx; ++i) {
      const CVec& h = ch.h_at(i, k);
      row.insert(row.end(), h.data(), h.data() + h.size());
    }
    const auto packed = pack_complex(row);
    ue.insert(ue.end(), packed.begin(), packed.end());
  }
}

HeteroGraph build_graph(const SystemConfig& config, const ChannelSet& ch) {
  HeteroGraph g;
  g.dims = graph_dims(config);
  const GraphDims& d = g.dims;
  check_channels(d, ch);
  for (NodeType t : kAllNodeTypes) g.adjacency[type_index(t)].assign(d.count(t), {});
  auto& tap = g.adjacency[type_index(NodeType::tap)];
  auto& rap = g.adjacency[type_index(NodeType::rap)];
  auto& ue = g.adjacency[type_index(NodeType::ue)];
  for (std::size_t t = 0; t < d.count(NodeType::tap); ++t) {
    for (std::size_t k = 0; k < d.users; ++k) {
      tap[t].push_back({NodeType::ue, k});
      ue[k].push_back({NodeType::tap, t});
    }
    for (std::size_t r = 0; r < d.count(NodeType::rap); ++r) {
      tap[t].push_back({NodeType::rap, r});
      rap[r].push_back({NodeType::tap, t});
    }
  }
  init_features(g, ch);
  return g;
}

}  // namespace isac
