#include "sacd/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace sacd {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a.shape) + " and " +
                              shape_str(b.shape));
}

// Broadcast layout for add/mul: equal shapes, rank-1 bias over rank-2 rows,
// or a single-element scalar against anything.
enum class Bcast { kSame, kRowsLhs, kRowsRhs, kScalarLhs, kScalarRhs };

Bcast classify(const char* op, const Tensor& a, const Tensor& b, bool allow_rows) {
  if (a.same_shape(b)) return Bcast::kSame;
  if (a.numel() == 1) return Bcast::kScalarLhs;
  if (b.numel() == 1) return Bcast::kScalarRhs;
  if (allow_rows && a.rank() == 2 && b.rank() == 1 && b.shape[0] == a.shape[1]) return Bcast::kRowsRhs;
  if (allow_rows && b.rank() == 2 && a.rank() == 1 && a.shape[0] == b.shape[1]) return Bcast::kRowsLhs;
  shape_error(op, a, b);
}

}  // namespace

Tape::NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Tape::NodeId Tape::leaf(Tensor value) { return push({Op::kLeaf, {}, std::move(value), {}, 0.0}); }

Tape::NodeId Tape::param(Tensor value) {
  NodeId id = push({Op::kParam, {}, std::move(value), {}, 0.0});
  params_.push_back(id);
  return id;
}

Tape::NodeId Tape::input(const std::string& name, Tensor value) {
  NodeId id = leaf(std::move(value));
  names_[name] = id;
  return id;
}

Tape::NodeId Tape::named(const std::string& name) const {
  auto it = names_.find(name);
  if (it == names_.end()) throw std::invalid_argument("Tape: no input bound under name '" + name + "'");
  return it->second;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0]) shape_error("matmul", av, bv);
  return push({Op::kMatmul, {a, b}, sacd::matmul(av, bv), {}, 0.0});
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  const Bcast mode = classify("add", av, bv, true);
  Tensor out;
  switch (mode) {
    case Bcast::kSame: {
      out = av;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
      break;
    }
    case Bcast::kScalarLhs: {
      out = bv;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] += av[0];
      break;
    }
    case Bcast::kScalarRhs: {
      out = av;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[0];
      break;
    }
    case Bcast::kRowsRhs: {
      out = av;
      const std::size_t n = bv.numel();
      for (std::size_t r = 0; r < av.shape[0]; ++r)
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
      break;
    }
    case Bcast::kRowsLhs: {
      out = bv;
      const std::size_t n = av.numel();
      for (std::size_t r = 0; r < bv.shape[0]; ++r)
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] += av[j];
      break;
    }
  }
  return push({Op::kAdd, {a, b}, std::move(out), {}, 0.0});
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  const Bcast mode = classify("sub", av, bv, true);
  Tensor out;
  switch (mode) {
    case Bcast::kSame: {
      out = av;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
      break;
    }
    case Bcast::kScalarLhs: {
      out = bv;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[0] - bv[i];
      break;
    }
    case Bcast::kScalarRhs: {
      out = av;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[0];
      break;
    }
    case Bcast::kRowsRhs: {
      out = av;
      const std::size_t n = bv.numel();
      for (std::size_t r = 0; r < av.shape[0]; ++r)
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] -= bv[j];
      break;
    }
    case Bcast::kRowsLhs: {
      out = bv;
      const std::size_t n = av.numel();
      for (std::size_t r = 0; r < bv.shape[0]; ++r)
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] = av[j] - bv[r * n + j];
      break;
    }
  }
  return push({Op::kSub, {a, b}, std::move(out), {}, 0.0});
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  const Bcast mode = classify("mul", av, bv, false);
  Tensor out;
  switch (mode) {
    case Bcast::kSame: {
      out = av;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
      break;
    }
    case Bcast::kScalarLhs: {
      out = bv;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= av[0];
      break;
    }
    case Bcast::kScalarRhs: {
      out = av;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[0];
      break;
    }
    default:
      shape_error("mul", av, bv);
  }
  return push({Op::kMul, {a, b}, std::move(out), {}, 0.0});
}

Tape::NodeId Tape::relu(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push({Op::kRelu, {a}, std::move(out), {}, 0.0});
}

Tape::NodeId Tape::log(NodeId a) {
  const Tensor& av = value(a);
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (av[i] <= 0.0) {
      throw std::domain_error("log: non-positive input " + std::to_string(av[i]) + " at flat index " +
                              std::to_string(i));
    }
    out[i] = std::log(av[i]);
  }
  return push({Op::kLog, {a}, std::move(out), {}, 0.0});
}

Tape::NodeId Tape::exp(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::exp(v);
  if (!out.all_finite()) throw std::domain_error("exp: overflow to non-finite value");
  return push({Op::kExp, {a}, std::move(out), {}, 0.0});
}

Tape::NodeId Tape::softmax(NodeId a) {
  return push({Op::kSoftmax, {a}, softmax_last_axis(value(a)), {}, 0.0});
}

Tape::NodeId Tape::log_softmax(NodeId a) {
  return push({Op::kLogSoftmax, {a}, log_softmax_last_axis(value(a)), {}, 0.0});
}

Tape::NodeId Tape::sum(NodeId a) {
  double s = 0.0;
  for (double v : value(a).data) s += v;
  return push({Op::kSum, {a}, Tensor::scalar(s), {}, 0.0});
}

Tape::NodeId Tape::mean(NodeId a) {
  double s = 0.0;
  for (double v : value(a).data) s += v;
  return push({Op::kMean, {a}, Tensor::scalar(s / static_cast<double>(value(a).numel())), {}, 0.0});
}

Tape::NodeId Tape::square(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v *= v;
  return push({Op::kSquare, {a}, std::move(out), {}, 0.0});
}

Tape::NodeId Tape::neg(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = -v;
  return push({Op::kNeg, {a}, std::move(out), {}, 0.0});
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v *= c;
  return push({Op::kScale, {a}, std::move(out), {}, c});
}

Tape::NodeId Tape::clamp_min(NodeId a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v = v < c ? c : v;
  return push({Op::kClampMin, {a}, std::move(out), {}, c});
}

Tape::NodeId Tape::gather_rows(NodeId a, std::vector<std::size_t> indices) {
  const Tensor& av = value(a);
  if (av.rank() != 2) throw std::invalid_argument("gather_rows: expects rank-2 input, got " + shape_str(av.shape));
  const std::size_t n = av.shape[1];
  Tensor out({indices.size(), n}, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= av.shape[0]) throw std::out_of_range("gather_rows: row index out of range");
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[indices[i] * n + j];
  }
  return push({Op::kGatherRows, {a}, std::move(out), std::move(indices), 0.0});
}

Tape::NodeId Tape::gather_cols(NodeId a, std::vector<std::size_t> indices) {
  const Tensor& av = value(a);
  if (av.rank() != 2) throw std::invalid_argument("gather_cols: expects rank-2 input, got " + shape_str(av.shape));
  if (indices.size() != av.shape[0]) {
    throw std::invalid_argument("gather_cols: need one column index per row (" + std::to_string(av.shape[0]) +
                                " rows, " + std::to_string(indices.size()) + " indices)");
  }
  Tensor out({indices.size()}, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= av.shape[1]) throw std::out_of_range("gather_cols: column index out of range");
    out[i] = av[i * av.shape[1] + indices[i]];
  }
  return push({Op::kGatherCols, {a}, std::move(out), std::move(indices), 0.0});
}

const Tensor& Tape::Gradients::at(NodeId id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return values[i];
  }
  throw std::invalid_argument("Gradients::at: node " + std::to_string(id) + " is not a registered parameter");
}

Tape::Gradients Tape::backward(NodeId loss) const {
  if (value(loss).numel() != 1) {
    throw std::invalid_argument("backward: loss node must hold a single scalar, has shape " +
                                shape_str(value(loss).shape));
  }

  std::vector<Tensor> adj(nodes_.size());
  std::vector<bool> live(nodes_.size(), false);
  auto touch = [&](NodeId id) -> Tensor& {
    if (!live[id]) {
      adj[id] = Tensor(nodes_[id].value.shape, 0.0);
      live[id] = true;
    }
    return adj[id];
  };
  touch(loss)[0] = 1.0;

  for (NodeId id = loss + 1; id-- > 0;) {
    if (!live[id]) continue;
    const Node& node = nodes_[id];
    const Tensor& g = adj[id];
    switch (node.op) {
      case Op::kLeaf:
      case Op::kParam:
        break;
      case Op::kMatmul: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        const Tensor& b = nodes_[node.inputs[1]].value;
        const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
        Tensor& da = touch(node.inputs[0]);
        Tensor& db = touch(node.inputs[1]);
        // da = g . b^T, row-contiguous dot products
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b.data.data() + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            da[i * k + p] += acc;
          }
        }
        // db = a^T . g, axpy per row; zero activations (one-hot inputs,
        // dead relus) are skipped
        for (std::size_t i = 0; i < m; ++i) {
          const double* arow = a.data.data() + i * k;
          const double* grow = g.data.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double api = arow[p];
            if (api == 0.0) continue;
            double* dbrow = db.data.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) dbrow[j] += api * grow[j];
          }
        }
        break;
      }
      case Op::kAdd:
      case Op::kSub: {
        const double sign = node.op == Op::kSub ? -1.0 : 1.0;
        const Tensor& a = nodes_[node.inputs[0]].value;
        const Tensor& b = nodes_[node.inputs[1]].value;
        Tensor& da = touch(node.inputs[0]);
        Tensor& db = touch(node.inputs[1]);
        if (a.same_shape(b)) {
          for (std::size_t i = 0; i < g.numel(); ++i) {
            da[i] += g[i];
            db[i] += sign * g[i];
          }
        } else if (a.numel() == 1) {
          for (std::size_t i = 0; i < g.numel(); ++i) {
            da[0] += g[i];
            db[i] += sign * g[i];
          }
        } else if (b.numel() == 1) {
          for (std::size_t i = 0; i < g.numel(); ++i) {
            da[i] += g[i];
            db[0] += sign * g[i];
          }
        } else if (b.rank() == 1) {  // rows broadcast of rhs
          const std::size_t n = b.numel();
          for (std::size_t i = 0; i < g.numel(); ++i) {
            da[i] += g[i];
            db[i % n] += sign * g[i];
          }
        } else {  // rows broadcast of lhs
          const std::size_t n = a.numel();
          for (std::size_t i = 0; i < g.numel(); ++i) {
            da[i % n] += g[i];
            db[i] += sign * g[i];
          }
        }
        break;
      }
      case Op::kMul: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        const Tensor& b = nodes_[node.inputs[1]].value;
        Tensor& da = touch(node.inputs[0]);
        Tensor& db = touch(node.inputs[1]);
        if (a.same_shape(b)) {
          for (std::size_t i = 0; i < g.numel(); ++i) {
            da[i] += g[i] * b[i];
            db[i] += g[i] * a[i];
          }
        } else if (a.numel() == 1) {
          for (std::size_t i = 0; i < g.numel(); ++i) {
            da[0] += g[i] * b[i];
            db[i] += g[i] * a[0];
          }
        } else {
          for (std::size_t i = 0; i < g.numel(); ++i) {
            da[i] += g[i] * b[0];
            db[0] += g[i] * a[i];
          }
        }
        break;
      }
      case Op::kRelu: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        Tensor& dx = touch(node.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i)
          if (x[i] > 0.0) dx[i] += g[i];
        break;
      }
      case Op::kLog: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        Tensor& dx = touch(node.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] / x[i];
        break;
      }
      case Op::kExp: {
        Tensor& dx = touch(node.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] * node.value[i];
        break;
      }
      case Op::kSoftmax: {
        const Tensor& p = node.value;
        Tensor& dx = touch(node.inputs[0]);
        const std::size_t n = p.shape.back();
        const std::size_t rows = p.numel() / n;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* pr = p.data.data() + r * n;
          const double* gr = g.data.data() + r * n;
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += gr[j] * pr[j];
          for (std::size_t j = 0; j < n; ++j) dx[r * n + j] += pr[j] * (gr[j] - dot);
        }
        break;
      }
      case Op::kLogSoftmax: {
        const Tensor& lp = node.value;
        Tensor& dx = touch(node.inputs[0]);
        const std::size_t n = lp.shape.back();
        const std::size_t rows = lp.numel() / n;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* lpr = lp.data.data() + r * n;
          const double* gr = g.data.data() + r * n;
          double gsum = 0.0;
          for (std::size_t j = 0; j < n; ++j) gsum += gr[j];
          for (std::size_t j = 0; j < n; ++j) dx[r * n + j] += gr[j] - std::exp(lpr[j]) * gsum;
        }
        break;
      }
      case Op::kSum: {
        Tensor& dx = touch(node.inputs[0]);
        for (double& v : dx.data) v += g[0];
        break;
      }
      case Op::kMean: {
        Tensor& dx = touch(node.inputs[0]);
        const double gi = g[0] / static_cast<double>(dx.numel());
        for (double& v : dx.data) v += gi;
        break;
      }
      case Op::kSquare: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        Tensor& dx = touch(node.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += 2.0 * x[i] * g[i];
        break;
      }
      case Op::kNeg: {
        Tensor& dx = touch(node.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i) dx[i] -= g[i];
        break;
      }
      case Op::kScale: {
        Tensor& dx = touch(node.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += node.c * g[i];
        break;
      }
      case Op::kClampMin: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        Tensor& dx = touch(node.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i)
          if (x[i] >= node.c) dx[i] += g[i];
        break;
      }
      case Op::kGatherRows: {
        Tensor& dx = touch(node.inputs[0]);
        const std::size_t n = dx.shape[1];
        for (std::size_t i = 0; i < node.indices.size(); ++i)
          for (std::size_t j = 0; j < n; ++j) dx[node.indices[i] * n + j] += g[i * n + j];
        break;
      }
      case Op::kGatherCols: {
        Tensor& dx = touch(node.inputs[0]);
        const std::size_t n = dx.shape[1];
        for (std::size_t i = 0; i < node.indices.size(); ++i) dx[i * n + node.indices[i]] += g[i];
        break;
      }
    }
  }

  Gradients out;
  out.ids = params_;
  out.values.reserve(params_.size());
  for (NodeId id : params_) {
    out.values.push_back(live[id] ? std::move(adj[id]) : Tensor(nodes_[id].value.shape, 0.0));
  }
  return out;
}

}  // namespace sacd
