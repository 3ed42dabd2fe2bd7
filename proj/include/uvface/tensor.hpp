#pragma once

// Dense f64 tensor with a reverse-mode tape.
//
// Tensors are immutable values once handed to a Graph; ops are pure and may
// be called from any thread. A Graph records one forward pass and supports
// exactly one backward pass. Images follow NCHW layout (row-major,
// channels-first); convolution weights are OIKK, transposed-convolution
// weights are IOKK.

#include <cstdint>
#include <string>
#include <vector>

#include "uvface/errors.hpp"

namespace uvface {

using Dims = std::vector<int>;

long long dims_numel(const Dims& dims);
std::string dims_str(const Dims& dims);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims);  // zero-filled
  Tensor(Dims dims, std::vector<double> values);

  static Tensor zeros(Dims dims) { return Tensor(std::move(dims)); }
  static Tensor full(Dims dims, double value);
  static Tensor ones(Dims dims) { return full(std::move(dims), 1.0); }
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const Dims& dims() const { return dims_; }
  int ndim() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
  long long numel() const { return numel_; }
  bool defined() const { return numel_ > 0; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](long long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long long i) const { return data_[static_cast<size_t>(i)]; }

  // Element access for ndim <= 4; indices in dim order.
  double& at(int a) { return data_[static_cast<size_t>(a)]; }
  double& at(int a, int b);
  double& at(int a, int b, int c);
  double& at(int a, int b, int c, int d);
  double at(int a, int b, int c) const;
  double at(int a, int b, int c, int d) const;

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool v) {
    requires_grad_ = v;
    return *this;
  }

  bool all_finite() const;
  bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

 private:
  Dims dims_;
  std::vector<double> data_;
  long long numel_ = 0;
  bool requires_grad_ = false;
};

// Deterministic RNG: mt19937_64 with hand-rolled uniform/normal draws so the
// byte stream does not depend on the standard library's distribution
// implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();  // standard normal, Box-Muller
  double normal(double mu, double sigma) { return mu + sigma * normal(); }
  int uniform_int(int lo, int hi);  // inclusive bounds, rejection sampled

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream (dataset ids, per-model init, ...).
  Rng fork(uint64_t stream) const;

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Tensor random_normal(Dims dims, Rng& rng, double mu = 0.0, double sigma = 1.0);
Tensor random_uniform(Dims dims, Rng& rng, double lo = 0.0, double hi = 1.0);

// ---------------------------------------------------------------------------
// Graph: reverse-mode tape.
// ---------------------------------------------------------------------------

struct Node {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class OpKind {
  kLeaf,
  kAdd,
  kSub,
  kMul,       // elementwise; also broadcasts a [1,1,H,W] mask over [N,C,H,W]
  kScale,     // x * a
  kOffset,    // x + a
  kAbs,
  kRelu,
  kLeakyRelu,
  kTanh,
  kSigmoid,
  kLogClamped,  // log(max(x, eps))
  kFlipW,       // reverse the last axis
  kConcat,
  kSlice,
  kSum,            // -> scalar
  kMean,           // -> scalar
  kMeanPerSample,  // [N,...] -> [N]
  kL1Mean,         // mean(|a - b|) -> scalar
  kBiasAdd,        // [N,C,H,W] + [C]
  kBroadcastHW,    // [N,C] -> [N,C,h,w]
  kConv2d,
  kDeconv2d,
  kInstanceNorm,
};

const char* op_name(OpKind kind);

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves. param() marks the tensor for gradient tracking regardless of its
  // requires_grad flag; input() respects the flag.
  Node constant(Tensor t);
  Node param(Tensor t);
  Node input(Tensor t);

  Node add(Node a, Node b);
  Node sub(Node a, Node b);
  Node mul(Node a, Node b);
  Node scale(Node x, double a);
  Node offset(Node x, double a);
  Node abs(Node x);
  Node relu(Node x);
  Node leaky_relu(Node x, double slope);
  Node tanh(Node x);
  Node sigmoid(Node x);
  Node log_clamped(Node x, double eps = 1e-12);
  Node flip_w(Node x);
  Node concat(const std::vector<Node>& xs, int axis);
  Node slice(Node x, int axis, int start, int len);
  Node sum(Node x);
  Node mean(Node x);
  Node mean_per_sample(Node x);
  Node l1_mean(Node a, Node b);
  Node bias_add(Node x, Node b);
  Node broadcast_hw(Node v, int h, int w);
  Node conv2d(Node x, Node w, int stride, int padding);
  Node deconv2d(Node x, Node w, int stride, int padding);
  Node instance_norm(Node x, double eps = 1e-5);

  // Backpropagates from a scalar loss node. Gradients accumulate additively
  // across fan-out. A second call without a fresh forward pass throws.
  void backward(Node loss);

  const Tensor& value(Node n) const;
  // Gradient of the last backward pass; zero tensor if the node was never
  // reached. Throws if backward has not run or the node is untracked.
  const Tensor& grad(Node n) const;
  bool tracks_grad(Node n) const;
  int size() const { return static_cast<int>(recs_.size()); }

 private:
  struct Rec {
    OpKind kind;
    std::vector<int> parents;
    Tensor value;
    Tensor grad;
    Tensor aux;  // op-specific saved state (instance_norm inv-std)
    std::vector<int> iattrs;
    std::vector<double> dattrs;
    bool needs_grad = false;
  };

  Node emit(OpKind kind, std::vector<int> parents, Tensor value,
            std::vector<int> iattrs = {}, std::vector<double> dattrs = {},
            Tensor aux = {});
  const Rec& rec(Node n) const;
  Rec& mutable_rec(Node n);
  void accumulate(int id, const Tensor& g);
  void backprop_node(int id);

  std::vector<Rec> recs_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Adam optimizer (bias-corrected; defaults follow common GAN practice).
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  long long step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  void init(const std::vector<const Tensor*>& params);
  bool initialized() const { return !m.empty(); }
};

// One update over an aligned parameter list. Returns the new parameter
// values; `state` advances by one step.
std::vector<Tensor> adam_step(AdamState& state,
                              const std::vector<const Tensor*>& params,
                              const std::vector<const Tensor*>& grads);

}  // namespace uvface
