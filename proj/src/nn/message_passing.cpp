#include "ssmail/nn/message_passing.hpp"

#include "ssmail/autodiff/ops.hpp"
#include "ssmail/common/error.hpp"

namespace ssmail::nn {

PairIndex::PairIndex(std::size_t nodes, std::size_t batch) : nodes_(nodes), batch_(batch) {
  if (nodes < 2) throw Error("PairIndex: message passing needs at least 2 nodes, got " + std::to_string(nodes));
  if (batch == 0) throw Error("PairIndex: empty batch");
  for (std::size_t i = 0; i < nodes; ++i) {
    for (std::size_t j = 0; j < nodes; ++j) {
      if (i == j) continue;
      pair_sender_.push_back(i);
      pair_receiver_.push_back(j);
    }
  }
  const std::size_t e = edges_per_graph();
  senders_.resize(e * batch);
  receivers_.resize(e * batch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < e; ++k) {
      senders_[b * e + k] = b * nodes + pair_sender_[k];
      receivers_[b * e + k] = b * nodes + pair_receiver_[k];
    }
  }
}

std::size_t PairIndex::edge(std::size_t sender, std::size_t receiver) const {
  if (sender == receiver || sender >= nodes_ || receiver >= nodes_) {
    throw Error("PairIndex::edge: invalid pair (" + std::to_string(sender) + "," + std::to_string(receiver) + ")");
  }
  return sender * (nodes_ - 1) + (receiver < sender ? receiver : receiver - 1);
}

ad::Tensor node_to_edge(const ParameterSet& params, const MlpSpec& f_e, const PairIndex& graph,
                        const ad::Tensor& h_nodes, const std::optional<ad::Tensor>& edge_feats) {
  if (h_nodes.rank() != 2 || h_nodes.dim(0) != graph.node_rows()) {
    throw Error("node_to_edge: node features " + ad::shape_str(h_nodes.shape()) + " do not match " +
                std::to_string(graph.node_rows()) + " node rows");
  }
  std::vector<ad::Tensor> parts{ad::gather_rows(h_nodes, graph.sender_rows()),
                                ad::gather_rows(h_nodes, graph.receiver_rows())};
  if (edge_feats) {
    if (edge_feats->rank() != 2 || edge_feats->dim(0) != graph.edge_rows()) {
      throw Error("node_to_edge: edge features " + ad::shape_str(edge_feats->shape()) + " do not match " +
                  std::to_string(graph.edge_rows()) + " edge rows");
    }
    parts.push_back(*edge_feats);
  }
  return mlp_forward(params, f_e, ad::concat(parts, 1));
}

ad::Tensor aggregate_incoming(const PairIndex& graph, const ad::Tensor& h_edges) {
  if (h_edges.rank() != 2 || h_edges.dim(0) != graph.edge_rows()) {
    throw Error("aggregate_incoming: edge tensor " + ad::shape_str(h_edges.shape()) + " does not match " +
                std::to_string(graph.edge_rows()) + " edge rows");
  }
  return ad::segment_sum(h_edges, graph.receiver_rows(), graph.node_rows());
}

ad::Tensor edge_to_node(const ParameterSet& params, const MlpSpec& f_v, const PairIndex& graph,
                        const ad::Tensor& h_edges, const std::optional<ad::Tensor>& node_feats) {
  auto agg = aggregate_incoming(graph, h_edges);
  if (!node_feats) return mlp_forward(params, f_v, agg);
  if (node_feats->rank() != 2 || node_feats->dim(0) != graph.node_rows()) {
    throw Error("edge_to_node: node features " + ad::shape_str(node_feats->shape()) + " do not match " +
                std::to_string(graph.node_rows()) + " node rows");
  }
  return mlp_forward(params, f_v, ad::concat({agg, *node_feats}, 1));
}

ad::Tensor pairs_to_dense(const PairIndex& graph, const ad::Tensor& edge_values) {
  if (edge_values.rank() != 2 || edge_values.dim(0) != graph.edge_rows()) {
    throw Error("pairs_to_dense: expected " + std::to_string(graph.edge_rows()) + " edge rows, got " +
                ad::shape_str(edge_values.shape()));
  }
  const std::size_t n = graph.nodes();
  const std::size_t c = edge_values.dim(1);
  const std::size_t e = graph.edges_per_graph();
  std::vector<double> dense(graph.batch() * n * n * c, 0.0);
  const auto src = edge_values.data();
  for (std::size_t b = 0; b < graph.batch(); ++b) {
    for (std::size_t k = 0; k < e; ++k) {
      const std::size_t i = graph.sender_of(k);
      const std::size_t j = graph.receiver_of(k);
      for (std::size_t ch = 0; ch < c; ++ch) {
        dense[((b * n + i) * n + j) * c + ch] = src[(b * e + k) * c + ch];
      }
    }
  }
  return ad::Tensor({graph.batch(), n, n, c}, std::move(dense));
}

}  // namespace ssmail::nn
