#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ssmail/autodiff/tensor.hpp"
#include "ssmail/nn/layers.hpp"
#include "ssmail/nn/parameter_set.hpp"

namespace ssmail::nn {

/// Fully connected directed graph over `nodes` agents, replicated `batch`
/// times. Edge rows hold the N*(N-1) ordered pairs (i, j), i != j, in
/// sender-major order; self-pairs have no row. Node rows are b*N + i and
/// edge rows b*E + e.
class PairIndex {
 public:
  PairIndex(std::size_t nodes, std::size_t batch);

  std::size_t nodes() const { return nodes_; }
  std::size_t batch() const { return batch_; }
  std::size_t edges_per_graph() const { return nodes_ * (nodes_ - 1); }
  std::size_t node_rows() const { return nodes_ * batch_; }
  std::size_t edge_rows() const { return edges_per_graph() * batch_; }

  /// Row of pair (i, j) within one graph; i != j.
  std::size_t edge(std::size_t sender, std::size_t receiver) const;
  std::size_t sender_of(std::size_t e) const { return pair_sender_[e]; }
  std::size_t receiver_of(std::size_t e) const { return pair_receiver_[e]; }

  /// Global node row of each edge row's sender / receiver.
  const std::vector<std::size_t>& sender_rows() const { return senders_; }
  const std::vector<std::size_t>& receiver_rows() const { return receivers_; }

 private:
  std::size_t nodes_;
  std::size_t batch_;
  std::vector<std::size_t> pair_sender_;
  std::vector<std::size_t> pair_receiver_;
  std::vector<std::size_t> senders_;
  std::vector<std::size_t> receivers_;
};

/// h_(i,j) = f_e([h_i, h_j, s_(i,j)]) for every ordered pair.
/// h_nodes: [B*N, d]; edge_feats: [B*E, d_e]. Returns [B*E, f_e.out()].
ad::Tensor node_to_edge(const ParameterSet& params, const MlpSpec& f_e, const PairIndex& graph,
                        const ad::Tensor& h_nodes, const std::optional<ad::Tensor>& edge_feats = std::nullopt);

/// Sum of incoming edge rows per receiving node: [B*E, d] -> [B*N, d].
ad::Tensor aggregate_incoming(const PairIndex& graph, const ad::Tensor& h_edges);

/// h_j = f_v([sum_{i != j} h_(i,j), s_j]). Returns [B*N, f_v.out()].
ad::Tensor edge_to_node(const ParameterSet& params, const MlpSpec& f_v, const PairIndex& graph,
                        const ad::Tensor& h_edges, const std::optional<ad::Tensor>& node_feats = std::nullopt);

/// Dense [B, N, N, C] view of per-pair rows with zero diagonal (values only).
ad::Tensor pairs_to_dense(const PairIndex& graph, const ad::Tensor& edge_values);

}  // namespace ssmail::nn
