#pragma once

#include <vector>

#include "scdiff/matrix.hpp"

namespace scdiff {

/// Reverse-mode differentiation tape over Matrix values.
///
/// Nodes are appended in construction order, which is a topological order by
/// definition (an op can only reference ids that already exist). backward()
/// seeds d(loss)/d(loss) = 1 and applies the chain rule in one reverse pass,
/// visiting every node exactly once. A tape records one forward computation;
/// call reset() to reuse the storage for the next one.
class Tape {
  public:
    using NodeId = int;

    /// Input or parameter node.
    NodeId leaf(Matrix value);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId hadamard(NodeId a, NodeId b);
    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId relu(NodeId a);
    NodeId softmax_columns(NodeId a);
    NodeId scale(NodeId a, double c);
    NodeId add_scalar(NodeId a, double c);

    /// Tile a column vector (d x 1) across n columns.
    NodeId broadcast_columns(NodeId a, int n);

    /// Sum of all entries, a 1 x 1 node.
    NodeId sum_all(NodeId a);

    /// Rows [r0, r1) of a.
    NodeId slice_rows(NodeId a, int r0, int r1);

    /// Vertical stack [a; b].
    NodeId vstack(NodeId a, NodeId b);

    /// Row-major reshape to rows x cols (entry count preserved).
    NodeId reshape(NodeId a, int rows, int cols);

    const Matrix& value(NodeId id) const { return nodes_[id].value; }

    /// Gradient of the last backward() loss w.r.t. node id.
    const Matrix& grad(NodeId id) const { return nodes_[id].grad; }

    /// Reverse pass from a scalar (1 x 1) loss node.
    void backward(NodeId loss);

    void reset() { nodes_.clear(); }
    int size() const { return static_cast<int>(nodes_.size()); }

  private:
    enum class Op {
        leaf,
        add,
        sub,
        hadamard,
        matmul,
        transpose,
        relu,
        softmax_columns,
        scale,
        add_scalar,
        broadcast_columns,
        sum_all,
        slice_rows,
        vstack,
        reshape,
    };

    struct Node {
        Op op;
        NodeId a = -1;
        NodeId b = -1;
        double c = 0.0;  // scalar payload for scale/add_scalar
        int i0 = 0;      // slice bounds / reshape dims
        int i1 = 0;
        Matrix value;
        Matrix grad;
    };

    NodeId push(Node&& n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
};

}  // namespace scdiff
