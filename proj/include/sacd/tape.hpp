#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sacd/tensor.hpp"

namespace sacd {

// Reverse-mode autodiff over a define-by-run tape. Ops evaluate eagerly;
// the node list is the graph. Node ids strictly increase in creation
// order, so the backward pass is a single reverse sweep.
class Tape {
 public:
  using NodeId = std::size_t;

  enum class Op {
    kLeaf,
    kParam,
    kMatmul,
    kAdd,
    kSub,
    kMul,
    kRelu,
    kLog,
    kExp,
    kSoftmax,
    kLogSoftmax,
    kSum,
    kMean,
    kSquare,
    kNeg,
    kScale,
    kClampMin,
    kGatherRows,
    kGatherCols,
  };

  // Constant w.r.t. differentiation.
  NodeId leaf(Tensor value);
  // Leaf that receives a gradient in backward().
  NodeId param(Tensor value);
  // leaf() with a name attached, for callers that address inputs by name.
  NodeId input(const std::string& name, Tensor value);
  NodeId named(const std::string& name) const;

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeId>& params() const { return params_; }

  NodeId matmul(NodeId a, NodeId b);
  // Elementwise; also broadcasts a rank-1 [n] over the rows of a [b,n]
  // operand, and a scalar over anything.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  // Elementwise; broadcasts a scalar operand.
  NodeId mul(NodeId a, NodeId b);
  NodeId relu(NodeId a);
  NodeId log(NodeId a);
  NodeId exp(NodeId a);
  NodeId softmax(NodeId a);      // last axis
  NodeId log_softmax(NodeId a);  // last axis
  NodeId sum(NodeId a);          // all elements -> scalar
  NodeId mean(NodeId a);         // all elements -> scalar
  NodeId square(NodeId a);
  NodeId neg(NodeId a);
  NodeId scale(NodeId a, double c);      // multiply by a constant
  NodeId clamp_min(NodeId a, double c);  // max(x, c); gradient passes where x >= c
  // rows[i] selects row indices[i] of a rank-2 input -> [len(indices), n]
  NodeId gather_rows(NodeId a, std::vector<std::size_t> indices);
  // out[i] = a[i, indices[i]] for a rank-2 input -> [rows]
  NodeId gather_cols(NodeId a, std::vector<std::size_t> indices);

  struct Gradients {
    std::vector<NodeId> ids;     // parameter ids in registration order
    std::vector<Tensor> values;  // matching gradient tensors
    const Tensor& at(NodeId id) const;
  };

  // Gradients of a scalar loss w.r.t. every registered parameter.
  // Parameters the loss does not depend on get explicit zero gradients.
  Gradients backward(NodeId loss) const;

 private:
  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    std::vector<std::size_t> indices;  // gather ops
    double c = 0.0;                    // scale factor / clamp threshold
  };

  NodeId push(Node node);

  std::vector<Node> nodes_;
  std::vector<NodeId> params_;
  std::map<std::string, NodeId> names_;
};

}  // namespace sacd
