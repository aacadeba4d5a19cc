#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "gtx/rng.hpp"

namespace gtx {

class Tape;

enum class Nonlinearity { Relu, Tanh };

// Dense row-major matrix of doubles with an optional tape handle.
//
// Value semantics with a shared buffer: copies are cheap and alias the same
// storage. Mutate entries only on tensors you exclusively own (construction,
// optimizer steps between tapes); everything recorded on a live tape must be
// treated as immutable.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols);  // zero-filled

  static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
  static Tensor ones(int rows, int cols);
  static Tensor full(int rows, int cols, double value);
  static Tensor identity(int n);
  static Tensor from(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor from_data(int rows, int cols, std::vector<double> data);
  static Tensor randn(int rows, int cols, RngStream& rng, double stddev = 1.0);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }
  bool empty() const { return buf_ == nullptr; }

  double operator()(int i, int j) const { return (*buf_)[static_cast<size_t>(i) * cols_ + j]; }
  double& operator()(int i, int j) { return (*buf_)[static_cast<size_t>(i) * cols_ + j]; }
  const double* data() const { return buf_->data(); }
  double* data() { return buf_->data(); }

  // tape state
  Tape* tape() const { return tape_; }
  int node() const { return node_; }
  bool requires_grad() const { return tape_ != nullptr && node_ >= 0; }
  void detach() { tape_ = nullptr; node_ = -1; }

  Tensor clone() const;  // deep copy, detached
  double scalar() const; // value of a 1x1 tensor
  double max_abs() const;
  double frobenius_norm() const;
  bool all_finite() const;
  std::string shape_str() const;

 private:
  friend class Tape;
  int rows_ = 0, cols_ = 0;
  std::shared_ptr<std::vector<double>> buf_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Boolean matrix used as an optional softmax mask.
struct BoolMat {
  int rows = 0, cols = 0;
  std::vector<uint8_t> v;
  BoolMat() = default;
  BoolMat(int r, int c, bool init = false) : rows(r), cols(c), v(static_cast<size_t>(r) * c, init ? 1 : 0) {}
  uint8_t at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
  void set(int i, int j, bool b) { v[static_cast<size_t>(i) * cols + j] = b ? 1 : 0; }
};

// Reverse-mode tape, rebuilt per forward pass (define-by-run). Nodes are
// stored in topological order by construction; backward() walks them in
// reverse. Single-threaded per tape; independent tapes may live on separate
// threads.
class Tape {
 public:
  using Grads = std::vector<Tensor>;  // indexed by node id; empty = no gradient
  using BackFn = std::function<void(const Tensor& gout, Grads& grads)>;

  // Register `t` as a leaf of this tape (in place). The tensor must not be
  // bound to another live tape.
  void bind(Tensor& t);
  Tensor leaf(Tensor t) { bind(t); return t; }

  // reverse accumulation from a scalar loss recorded on this tape
  Grads backward(const Tensor& loss);

  static Tensor grad(const Grads& grads, const Tensor& t);

  int record(std::vector<int> parents, BackFn back);
  int size() const { return static_cast<int>(nodes_.size()); }

  // tag a freshly computed op result with its node id (op implementations)
  Tensor adopt(Tensor t, int node) {
    t.tape_ = this;
    t.node_ = node;
    return t;
  }

 private:
  struct Node {
    std::vector<int> parents;
    BackFn back;  // null for leaves
  };
  std::vector<Node> nodes_;
};

// accumulate `delta` into grads[node] (allocating on first touch)
void accumulate_grad(Tape::Grads& grads, int node, const Tensor& delta);

// ---- differentiable operations -------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor sum(const Tensor& a);  // 1x1
Tensor vstack(const std::vector<Tensor>& parts);

Tensor pointwise_nonlinearity(const Tensor& x, Nonlinearity kind);

// Copy rows*cols consecutive entries starting at flat position `offset` of a
// 1 x M tensor into a rows x cols tensor; gradients scatter back into the
// flat vector. Used to express whole-model gradients w.r.t. one flat
// parameter vector.
Tensor unflatten_slice(const Tensor& flat, int offset, int rows, int cols);

// Row softmax over unmasked entries; masked entries are exactly zero.
// Stabilized by subtracting the per-row max. A row with no unmasked entry is
// an error (callers add self-loops first).
Tensor masked_row_softmax(const Tensor& scores, const BoolMat* mask = nullptr);

// Normalize each column over the feature dimension (zero mean, unit
// variance); no learned affine.
Tensor layer_norm_cols(const Tensor& x, double eps = 1e-6);

// Inverted dropout; identity when `training` is false or rate is 0.
Tensor dropout(const Tensor& x, double rate, RngStream& rng, bool training);

// column j of the result is column i of x where perm[i] = j (plain data op,
// not differentiable)
Tensor permute_cols(const Tensor& x, const std::vector<int>& perm);

// ---- gradient checking -----------------------------------------------------

// f builds a scalar-valued computation from a tape-bound copy of x.
// Returns max over entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
// with central differences of the given step.
double finite_diff_check(const std::function<Tensor(Tape&, Tensor)>& f, const Tensor& x0,
                         double step = 1e-6);

}  // namespace gtx
