#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "glformer/numcore/ops.hpp"

namespace glformer {

class Tape;

// Handle to a value slot on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Adjoint accumulator handed to backward closures.
class GradBuffer {
 public:
  explicit GradBuffer(std::size_t n, std::vector<bool> tracked)
      : grads_(n), set_(n, false), tracked_(std::move(tracked)) {}

  bool tracked(std::size_t id) const { return tracked_[id]; }

  void accumulate(std::size_t id, Matrix g) {
    if (!tracked_[id]) return;
    if (!set_[id]) {
      grads_[id] = std::move(g);
      set_[id] = true;
    } else {
      ops::add_into(grads_[id], g);
    }
  }

  bool has(std::size_t id) const { return set_[id]; }
  const Matrix& get(std::size_t id) const { return grads_[id]; }
  std::vector<bool> presence() const { return set_; }
  std::vector<Matrix> release() { return std::move(grads_); }

 private:
  std::vector<Matrix> grads_;
  std::vector<bool> set_;
  std::vector<bool> tracked_;
};

// Result of a reverse sweep: d(loss)/d(slot) for every slot that requires a
// gradient. Slots the loss does not depend on report an all-zero matrix.
class Gradients {
 public:
  Gradients() = default;
  Gradients(std::vector<Matrix> grads, std::vector<bool> present, std::vector<std::pair<std::size_t, std::size_t>> shapes,
            std::unordered_map<const Matrix*, std::size_t> params, std::vector<std::size_t> visited)
      : grads_(std::move(grads)),
        present_(std::move(present)),
        shapes_(std::move(shapes)),
        params_(std::move(params)),
        visited_(std::move(visited)) {}

  Matrix of(Var v) const { return at(v.id); }

  // Gradient with respect to an external parameter bound via Tape::param().
  // A parameter that never entered the tape has an exactly-zero gradient.
  Matrix of(const Matrix& param) const {
    auto it = params_.find(&param);
    if (it == params_.end()) return Matrix(param.rows(), param.cols());
    return at(it->second);
  }

  // Ids of slots whose adjoint rule ran, in execution order.
  const std::vector<std::size_t>& visit_order() const { return visited_; }

 private:
  Matrix at(std::size_t id) const {
    if (id >= grads_.size()) throw ContractError("Gradients: unknown slot");
    return present_[id] ? grads_[id] : Matrix(shapes_[id].first, shapes_[id].second);
  }

  std::vector<Matrix> grads_;
  std::vector<bool> present_;
  std::vector<std::pair<std::size_t, std::size_t>> shapes_;
  std::unordered_map<const Matrix*, std::size_t> params_;
  std::vector<std::size_t> visited_;
};

// Append-only record of a forward computation. Each primitive writes one new
// slot; backward() replays the adjoint rules in exact reverse order.
// Single-owner and single-threaded; Vars keep a pointer to their tape, so a
// Tape is neither copyable nor movable.
class Tape {
 public:
  using Backward = std::function<void(const Matrix& grad_out, GradBuffer& grads)>;

  Tape() = default;
  // With track_gradients = false, parameters and leaves are recorded as
  // constants and no adjoints are kept (inference).
  explicit Tape(bool track_gradients) : track_(track_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Value without gradient tracking.
  Var constant(Matrix m) { return push(std::move(m), nullptr, false, nullptr, 0); }

  // Owned leaf with gradient tracking.
  Var leaf(Matrix m) { return push(std::move(m), nullptr, track_, nullptr, 0); }

  // Binds an external parameter by reference. Repeated calls with the same
  // matrix return the same slot, so gradients from every use are summed.
  // The matrix must outlive the tape and stay unmodified while it is in use.
  Var param(const Matrix& m) {
    auto it = params_.find(&m);
    if (it != params_.end()) return Var{this, it->second};
    Var v = push(Matrix{}, &m, track_, nullptr, 0);
    params_.emplace(&m, v.id);
    return v;
  }

  const Matrix& value(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.ref != nullptr ? *n.ref : n.value;
  }

  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Id the next recorded slot will receive; lets an adjoint refer to its own
  // output value.
  std::size_t next_id() const noexcept { return nodes_.size(); }

  // Tally of scalar arithmetic performed by recorded primitives (forward only).
  std::uint64_t op_count() const noexcept { return ops_; }
  void add_ops(std::uint64_t n) noexcept { ops_ += n; }

  // Records a primitive's output. `back` may be empty when no input needs a
  // gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward back, std::uint64_t ops) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(back), ops);
  }

  Var record(Matrix value, std::span<const Var> inputs, Backward back, std::uint64_t ops) {
    bool needs = false;
    for (Var in : inputs) {
      if (in.tape != this) throw ContractError("Tape: operand belongs to a different tape");
      needs = needs || nodes_[in.id].requires_grad;
    }
    if (!ops::all_finite(value)) throw ContractError("Tape: non-finite value produced");
    return push(std::move(value), nullptr, needs, needs ? std::move(back) : Backward{}, ops);
  }

  Gradients backward(Var loss) const {
    if (loss.tape != this) throw ContractError("backward: loss belongs to a different tape");
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward: loss slot must be scalar, got " + lv.shape());
    }
    std::vector<bool> tracked(nodes_.size());
    std::vector<std::pair<std::size_t, std::size_t>> shapes(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      tracked[i] = nodes_[i].requires_grad;
      const Matrix& v = nodes_[i].ref != nullptr ? *nodes_[i].ref : nodes_[i].value;
      shapes[i] = {v.rows(), v.cols()};
    }
    GradBuffer grads(nodes_.size(), std::move(tracked));
    std::vector<std::size_t> visited;
    grads.accumulate(loss.id, Matrix::scalar(1.0));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      const Node& n = nodes_[i];
      if (!n.back) continue;
      if (!grads.has(i)) continue;
      n.back(grads.get(i), grads);
      visited.push_back(i);
    }
    auto present = grads.presence();
    return Gradients(grads.release(), std::move(present), std::move(shapes), params_, std::move(visited));
  }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    bool requires_grad = false;
    Backward back;
  };

  Var push(Matrix value, const Matrix* ref, bool requires_grad, Backward back, std::uint64_t ops) {
    nodes_.push_back(Node{std::move(value), ref, requires_grad, std::move(back)});
    ops_ += ops;
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, std::size_t> params_;
  bool track_ = true;
  std::uint64_t ops_ = 0;
};

inline const Matrix& Var::value() const { return tape->value(*this); }

inline Gradients backward(Var loss) { return loss.tape->backward(loss); }

}  // namespace glformer
