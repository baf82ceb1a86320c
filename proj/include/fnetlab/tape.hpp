#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "fnetlab/tensor.hpp"

namespace fnetlab {

// Handle into one Tape's node list.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in execution order, so parents
// always precede children and a single reverse sweep propagates
// gradients. A tape is confined to one logical thread; independent
// replicas each own their own tape.
template <typename Scalar>
class Tape {
 public:
  struct BwdCtx;
  using BackwardFn = std::function<void(BwdCtx&)>;

  struct BackwardOptions {
    // Free node values and gradient slots as soon as the reverse sweep
    // is done with them (leaves keep both). Training uses this; leave
    // off when the whole gradient graph must stay inspectable.
    bool release_memory = false;
  };

  // Leaf over caller-owned storage. The caller keeps `external` alive
  // for the lifetime of the tape; parameters are bound this way once
  // per recorded graph.
  Var leaf(const Tensor<Scalar>& external) {
    Node n;
    n.external = &external;
    n.is_leaf = true;
    n.name = "leaf";
    return push(std::move(n));
  }

  Var leaf_owned(Tensor<Scalar> v) {
    Node n;
    n.owned = std::move(v);
    n.is_leaf = true;
    n.name = "leaf";
    return push(std::move(n));
  }

  Var emit(Tensor<Scalar> value, std::vector<Var> parents, BackwardFn fn,
           const char* name) {
    trap_check(value, name);
    Node n;
    n.owned = std::move(value);
    n.parents.reserve(parents.size());
    for (Var p : parents) {
      require(p.valid() && p.id < Index(nodes_.size()), "Tape::emit: bad parent");
      n.parents.push_back(p.id);
    }
    n.backward = std::move(fn);
    n.name = name;
    return push(std::move(n));
  }

  const Tensor<Scalar>& value(Var v) const {
    const Node& n = node(v.id);
    return n.external ? *n.external : n.owned;
  }

  bool has_grad(Var v) const { return node(v.id).grad.size() > 0; }

  const Tensor<Scalar>& grad(Var v) const {
    const Node& n = node(v.id);
    require(n.grad.size() > 0, std::string("Tape::grad: no gradient for node ") +
                                   n.name + " (run backward first?)");
    return n.grad;
  }

  Tensor<Scalar> grad_or_zeros(Var v) const {
    const Node& n = node(v.id);
    if (n.grad.size() > 0) return n.grad;
    return Tensor<Scalar>(shape_of(n));
  }

  // Reverse sweep from a scalar root. Rerunning on the same graph
  // clears old slots first, so repeated calls are bit-identical.
  void backward(Var root, BackwardOptions opts = {}) {
    require(root.valid(), "Tape::backward: invalid root");
    require(value(root).size() == 1, "Tape::backward: root must be scalar");
    for (Node& n : nodes_) n.grad = Tensor<Scalar>();
    node_mut(root.id).grad = Tensor<Scalar>::scalar(Scalar(1));
    for (std::int32_t id = root.id; id >= 0; --id) {
      Node& n = node_mut(id);
      if (n.grad.size() == 0) continue;
      if (n.backward) {
        BwdCtx ctx{*this, id};
        n.backward(ctx);
      }
      if (opts.release_memory && !n.is_leaf && id != root.id) {
        n.owned = Tensor<Scalar>();
        n.grad = Tensor<Scalar>();
      }
    }
  }

  size_t num_nodes() const { return nodes_.size(); }
  const char* name_of(Var v) const { return node(v.id).name; }

  // Locate the leaf bound to caller-owned storage (by address). Invalid
  // Var when the tensor was never bound.
  Var find_leaf(const Tensor<Scalar>& external) const {
    for (size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].external == &external) return Var{std::int32_t(i)};
    }
    return Var{};
  }

  struct BwdCtx {
    Tape& tape;
    std::int32_t id;

    const Tensor<Scalar>& out() const { return tape.value(Var{id}); }
    const Tensor<Scalar>& g() const { return tape.node(id).grad; }
    const Tensor<Scalar>& in(int k) const {
      return tape.value(Var{tape.node(id).parents.at(size_t(k))});
    }
    // Parent gradient accumulator, zero-initialized on first touch.
    Tensor<Scalar>& gin(int k) {
      Node& p = tape.node_mut(tape.node(id).parents.at(size_t(k)));
      if (p.grad.size() == 0) p.grad = Tensor<Scalar>(tape.shape_of(p));
      return p.grad;
    }
  };

 private:
  struct Node {
    Tensor<Scalar> owned;
    const Tensor<Scalar>* external = nullptr;
    std::vector<std::int32_t> parents;
    BackwardFn backward;
    const char* name = "";
    Tensor<Scalar> grad;
    bool is_leaf = false;
  };

  static std::vector<Index> shape_of(const Node& n) {
    return n.external ? n.external->dims() : n.owned.dims();
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{std::int32_t(nodes_.size() - 1)};
  }

  const Node& node(std::int32_t id) const {
    require(id >= 0 && id < std::int32_t(nodes_.size()), "Tape: bad node id");
    return nodes_[size_t(id)];
  }
  Node& node_mut(std::int32_t id) {
    require(id >= 0 && id < std::int32_t(nodes_.size()), "Tape: bad node id");
    return nodes_[size_t(id)];
  }

  std::vector<Node> nodes_;
};

}  // namespace fnetlab
