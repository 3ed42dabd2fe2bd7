#include "uvface/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <sstream>

namespace uvface {

long long dims_numel(const Dims& dims) {
  long long n = 1;
  for (int d : dims) {
    if (d <= 0) throw ShapeError("non-positive extent in dims " + dims_str(dims));
    n *= d;
  }
  return n;
}

std::string dims_str(const Dims& dims) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Dims dims) : dims_(std::move(dims)) {
  numel_ = dims_numel(dims_);
  data_.assign(static_cast<size_t>(numel_), 0.0);
}

Tensor::Tensor(Dims dims, std::vector<double> values) : dims_(std::move(dims)) {
  numel_ = dims_numel(dims_);
  if (numel_ != static_cast<long long>(values.size()))
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match dims " + dims_str(dims_));
  data_ = std::move(values);
}

Tensor Tensor::full(Dims dims, double value) {
  Tensor t(std::move(dims));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

double& Tensor::at(int a, int b) {
  return data_[static_cast<size_t>(a) * dims_[1] + b];
}
double& Tensor::at(int a, int b, int c) {
  return data_[(static_cast<size_t>(a) * dims_[1] + b) * dims_[2] + c];
}
double& Tensor::at(int a, int b, int c, int d) {
  return data_[((static_cast<size_t>(a) * dims_[1] + b) * dims_[2] + c) * dims_[3] + d];
}
double Tensor::at(int a, int b, int c) const {
  return data_[(static_cast<size_t>(a) * dims_[1] + b) * dims_[2] + c];
}
double Tensor::at(int a, int b, int c, int d) const {
  return data_[((static_cast<size_t>(a) * dims_[1] + b) * dims_[2] + c) * dims_[3] + d];
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

namespace {
uint64_t splitmix64(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw UsageError("uniform_int: empty range");
  uint64_t range = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
  uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return lo + static_cast<int>(v % range);
}

Rng Rng::fork(uint64_t stream) const {
  uint64_t s = state_ ^ (0x632be59bd9b4e019ull * (stream + 1));
  splitmix64(s);
  return Rng(s);
}

Tensor random_normal(Dims dims, Rng& rng, double mu, double sigma) {
  Tensor t(std::move(dims));
  for (long long i = 0; i < t.numel(); ++i) t[i] = rng.normal(mu, sigma);
  return t;
}

Tensor random_uniform(Dims dims, Rng& rng, double lo, double hi) {
  Tensor t(std::move(dims));
  for (long long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// ---------------------------------------------------------------------------
// GEMM + im2col helpers (row-major)
// ---------------------------------------------------------------------------

namespace {

// C[M,N] (+)= A[M,K] * B[K,N]
void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C,
             bool accumulate) {
  for (int i = 0; i < M; ++i) {
    double* c = C + static_cast<size_t>(i) * N;
    if (!accumulate) std::memset(c, 0, sizeof(double) * static_cast<size_t>(N));
    const double* a = A + static_cast<size_t>(i) * K;
    for (int k = 0; k < K; ++k) {
      const double av = a[k];
      const double* b = B + static_cast<size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M,N] (+)= A[M,K] * B[N,K]^T
void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C,
             bool accumulate) {
  for (int i = 0; i < M; ++i) {
    const double* a = A + static_cast<size_t>(i) * K;
    double* c = C + static_cast<size_t>(i) * N;
    for (int j = 0; j < N; ++j) {
      const double* b = B + static_cast<size_t>(j) * K;
      double acc = 0.0;
      for (int k = 0; k < K; ++k) acc += a[k] * b[k];
      c[j] = accumulate ? c[j] + acc : acc;
    }
  }
}

// C[M,N] (+)= A[K,M]^T * B[K,N]
void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C,
             bool accumulate) {
  if (!accumulate) std::memset(C, 0, sizeof(double) * static_cast<size_t>(M) * N);
  for (int k = 0; k < K; ++k) {
    const double* a = A + static_cast<size_t>(k) * M;
    const double* b = B + static_cast<size_t>(k) * N;
    for (int i = 0; i < M; ++i) {
      const double av = a[i];
      double* c = C + static_cast<size_t>(i) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// Unrolls one image [C,Him,Wim] into col [C*K*K, Hc*Wc] for a conv with the
// given kernel/stride/padding; out-of-bounds taps read zero.
void im2col(const double* im, int C, int Him, int Wim, int K, int S, int P,
            int Hc, int Wc, double* col) {
  const long long plane = static_cast<long long>(Hc) * Wc;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < K; ++ki) {
      for (int kj = 0; kj < K; ++kj) {
        double* dst = col + (static_cast<long long>(c) * K * K + ki * K + kj) * plane;
        const double* src = im + static_cast<long long>(c) * Him * Wim;
        for (int h = 0; h < Hc; ++h) {
          const int hi = h * S - P + ki;
          if (hi < 0 || hi >= Him) {
            std::memset(dst + static_cast<long long>(h) * Wc, 0,
                        sizeof(double) * static_cast<size_t>(Wc));
            continue;
          }
          const double* row = src + static_cast<long long>(hi) * Wim;
          double* drow = dst + static_cast<long long>(h) * Wc;
          for (int w = 0; w < Wc; ++w) {
            const int wi = w * S - P + kj;
            drow[w] = (wi >= 0 && wi < Wim) ? row[wi] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds col back into the image.
void col2im(const double* col, int C, int Him, int Wim, int K, int S, int P,
            int Hc, int Wc, double* im) {
  const long long plane = static_cast<long long>(Hc) * Wc;
  for (int c = 0; c < C; ++c) {
    double* dst = im + static_cast<long long>(c) * Him * Wim;
    for (int ki = 0; ki < K; ++ki) {
      for (int kj = 0; kj < K; ++kj) {
        const double* src = col + (static_cast<long long>(c) * K * K + ki * K + kj) * plane;
        for (int h = 0; h < Hc; ++h) {
          const int hi = h * S - P + ki;
          if (hi < 0 || hi >= Him) continue;
          double* row = dst + static_cast<long long>(hi) * Wim;
          const double* srow = src + static_cast<long long>(h) * Wc;
          for (int w = 0; w < Wc; ++w) {
            const int wi = w * S - P + kj;
            if (wi >= 0 && wi < Wim) row[wi] += srow[w];
          }
        }
      }
    }
  }
}

int conv_out_extent(int in, int k, int s, int p) {
  return (in + 2 * p - k) / s + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kOffset: return "offset";
    case OpKind::kAbs: return "abs";
    case OpKind::kRelu: return "relu";
    case OpKind::kLeakyRelu: return "leaky_relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLogClamped: return "log_clamped";
    case OpKind::kFlipW: return "flip_w";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kMeanPerSample: return "mean_per_sample";
    case OpKind::kL1Mean: return "l1_mean";
    case OpKind::kBiasAdd: return "bias_add";
    case OpKind::kBroadcastHW: return "broadcast_hw";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kDeconv2d: return "deconv2d";
    case OpKind::kInstanceNorm: return "instance_norm";
  }
  return "?";
}

const Graph::Rec& Graph::rec(Node n) const {
  if (n.id < 0 || n.id >= static_cast<int>(recs_.size()))
    throw UsageError("node does not belong to this graph");
  return recs_[static_cast<size_t>(n.id)];
}

Graph::Rec& Graph::mutable_rec(Node n) {
  return const_cast<Rec&>(rec(n));
}

Node Graph::emit(OpKind kind, std::vector<int> parents, Tensor value,
                 std::vector<int> iattrs, std::vector<double> dattrs, Tensor aux) {
  if (!value.all_finite())
    throw NumericalError(std::string("non-finite values in output of ") + op_name(kind));
  Rec r;
  r.kind = kind;
  r.parents = std::move(parents);
  r.value = std::move(value);
  r.iattrs = std::move(iattrs);
  r.dattrs = std::move(dattrs);
  r.aux = std::move(aux);
  for (int p : r.parents)
    if (recs_[static_cast<size_t>(p)].needs_grad) r.needs_grad = true;
  recs_.push_back(std::move(r));
  return Node{static_cast<int>(recs_.size()) - 1};
}

Node Graph::constant(Tensor t) {
  Tensor v = std::move(t);
  v.set_requires_grad(false);
  return emit(OpKind::kLeaf, {}, std::move(v));
}

Node Graph::param(Tensor t) {
  Node n = emit(OpKind::kLeaf, {}, std::move(t));
  recs_.back().needs_grad = true;
  return n;
}

Node Graph::input(Tensor t) {
  bool rg = t.requires_grad();
  Node n = emit(OpKind::kLeaf, {}, std::move(t));
  recs_.back().needs_grad = rg;
  return n;
}

const Tensor& Graph::value(Node n) const { return rec(n).value; }

bool Graph::tracks_grad(Node n) const { return rec(n).needs_grad; }

const Tensor& Graph::grad(Node n) const {
  if (!backward_done_) throw UsageError("grad: backward has not run");
  const Rec& r = rec(n);
  if (!r.needs_grad) throw UsageError("grad: node is not gradient-tracked");
  return r.grad;
}

namespace {
void check_same_dims(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_dims(b))
    throw ShapeError(std::string(op) + ": dims " + dims_str(a.dims()) + " vs " +
                     dims_str(b.dims()));
}
}  // namespace

Node Graph::add(Node a, Node b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_same_dims(av, bv, "add");
  Tensor out(av.dims());
  for (long long i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
  return emit(OpKind::kAdd, {a.id, b.id}, std::move(out));
}

Node Graph::sub(Node a, Node b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_same_dims(av, bv, "sub");
  Tensor out(av.dims());
  for (long long i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
  return emit(OpKind::kSub, {a.id, b.id}, std::move(out));
}

namespace {
// Mask broadcast: [1,1,H,W] against [N,C,H,W]. Returns 0 for plain
// elementwise, 1 if b is the mask, 2 if a is the mask.
int mul_mode(const Tensor& a, const Tensor& b) {
  if (a.same_dims(b)) return 0;
  auto is_mask_of = [](const Tensor& m, const Tensor& full) {
    return full.ndim() == 4 && m.ndim() == 4 && m.dim(0) == 1 && m.dim(1) == 1 &&
           m.dim(2) == full.dim(2) && m.dim(3) == full.dim(3);
  };
  if (is_mask_of(b, a)) return 1;
  if (is_mask_of(a, b)) return 2;
  throw ShapeError("mul: incompatible dims " + dims_str(a.dims()) + " vs " +
                   dims_str(b.dims()));
}
}  // namespace

Node Graph::mul(Node a, Node b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  const int mode = mul_mode(av, bv);
  const Tensor& full = mode == 2 ? bv : av;
  const Tensor& mask = mode == 2 ? av : bv;
  Tensor out(full.dims());
  if (mode == 0) {
    for (long long i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  } else {
    const long long plane = static_cast<long long>(full.dim(2)) * full.dim(3);
    const long long slices = full.numel() / plane;
    for (long long s = 0; s < slices; ++s)
      for (long long i = 0; i < plane; ++i)
        out[s * plane + i] = full[s * plane + i] * mask[i];
  }
  return emit(OpKind::kMul, {a.id, b.id}, std::move(out), {mode});
}

Node Graph::scale(Node x, double a) {
  const Tensor& xv = value(x);
  Tensor out(xv.dims());
  for (long long i = 0; i < out.numel(); ++i) out[i] = xv[i] * a;
  return emit(OpKind::kScale, {x.id}, std::move(out), {}, {a});
}

Node Graph::offset(Node x, double a) {
  const Tensor& xv = value(x);
  Tensor out(xv.dims());
  for (long long i = 0; i < out.numel(); ++i) out[i] = xv[i] + a;
  return emit(OpKind::kOffset, {x.id}, std::move(out), {}, {a});
}

Node Graph::abs(Node x) {
  const Tensor& xv = value(x);
  Tensor out(xv.dims());
  for (long long i = 0; i < out.numel(); ++i) out[i] = std::abs(xv[i]);
  return emit(OpKind::kAbs, {x.id}, std::move(out));
}

Node Graph::relu(Node x) {
  const Tensor& xv = value(x);
  Tensor out(xv.dims());
  for (long long i = 0; i < out.numel(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return emit(OpKind::kRelu, {x.id}, std::move(out));
}

Node Graph::leaky_relu(Node x, double slope) {
  const Tensor& xv = value(x);
  Tensor out(xv.dims());
  for (long long i = 0; i < out.numel(); ++i)
    out[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  return emit(OpKind::kLeakyRelu, {x.id}, std::move(out), {}, {slope});
}

Node Graph::tanh(Node x) {
  const Tensor& xv = value(x);
  Tensor out(xv.dims());
  for (long long i = 0; i < out.numel(); ++i) out[i] = std::tanh(xv[i]);
  return emit(OpKind::kTanh, {x.id}, std::move(out));
}

Node Graph::sigmoid(Node x) {
  const Tensor& xv = value(x);
  Tensor out(xv.dims());
  for (long long i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  return emit(OpKind::kSigmoid, {x.id}, std::move(out));
}

Node Graph::log_clamped(Node x, double eps) {
  const Tensor& xv = value(x);
  Tensor out(xv.dims());
  for (long long i = 0; i < out.numel(); ++i) out[i] = std::log(std::max(xv[i], eps));
  return emit(OpKind::kLogClamped, {x.id}, std::move(out), {}, {eps});
}

Node Graph::flip_w(Node x) {
  const Tensor& xv = value(x);
  const int W = xv.dim(xv.ndim() - 1);
  const long long rows = xv.numel() / W;
  Tensor out(xv.dims());
  for (long long r = 0; r < rows; ++r)
    for (int w = 0; w < W; ++w) out[r * W + w] = xv[r * W + (W - 1 - w)];
  return emit(OpKind::kFlipW, {x.id}, std::move(out));
}

Node Graph::concat(const std::vector<Node>& xs, int axis) {
  if (xs.empty()) throw UsageError("concat: no inputs");
  const Tensor& first = value(xs[0]);
  const int nd = first.ndim();
  if (axis < 0 || axis >= nd) throw ShapeError("concat: axis out of range");
  Dims out_dims = first.dims();
  std::vector<int> parents;
  for (const Node& n : xs) {
    const Tensor& t = value(n);
    if (t.ndim() != nd) throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != axis && t.dim(d) != first.dim(d))
        throw ShapeError("concat: dim mismatch on axis " + std::to_string(d) + ": " +
                         dims_str(t.dims()) + " vs " + dims_str(first.dims()));
    if (&t != &first) out_dims[static_cast<size_t>(axis)] += t.dim(axis);
    parents.push_back(n.id);
  }
  Tensor out(out_dims);
  long long outer = 1;
  for (int d = 0; d < axis; ++d) outer *= first.dim(d);
  long long inner = 1;
  for (int d = axis + 1; d < nd; ++d) inner *= first.dim(d);
  const long long out_block = static_cast<long long>(out_dims[static_cast<size_t>(axis)]) * inner;
  for (long long o = 0; o < outer; ++o) {
    long long off = 0;
    for (const Node& n : xs) {
      const Tensor& t = value(n);
      const long long blk = static_cast<long long>(t.dim(axis)) * inner;
      std::memcpy(out.data() + o * out_block + off, t.data() + o * blk,
                  sizeof(double) * static_cast<size_t>(blk));
      off += blk;
    }
  }
  return emit(OpKind::kConcat, std::move(parents), std::move(out), {axis});
}

Node Graph::slice(Node x, int axis, int start, int len) {
  const Tensor& xv = value(x);
  const int nd = xv.ndim();
  if (axis < 0 || axis >= nd) throw ShapeError("slice: axis out of range");
  if (start < 0 || len <= 0 || start + len > xv.dim(axis))
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") exceeds extent " +
                     std::to_string(xv.dim(axis)));
  Dims out_dims = xv.dims();
  out_dims[static_cast<size_t>(axis)] = len;
  Tensor out(out_dims);
  long long outer = 1;
  for (int d = 0; d < axis; ++d) outer *= xv.dim(d);
  long long inner = 1;
  for (int d = axis + 1; d < nd; ++d) inner *= xv.dim(d);
  const long long in_block = static_cast<long long>(xv.dim(axis)) * inner;
  const long long out_block = static_cast<long long>(len) * inner;
  for (long long o = 0; o < outer; ++o)
    std::memcpy(out.data() + o * out_block, xv.data() + o * in_block + start * inner,
                sizeof(double) * static_cast<size_t>(out_block));
  return emit(OpKind::kSlice, {x.id}, std::move(out), {axis, start, len});
}

Node Graph::sum(Node x) {
  const Tensor& xv = value(x);
  double s = 0.0;
  for (long long i = 0; i < xv.numel(); ++i) s += xv[i];
  return emit(OpKind::kSum, {x.id}, Tensor::scalar(s));
}

Node Graph::mean(Node x) {
  const Tensor& xv = value(x);
  double s = 0.0;
  for (long long i = 0; i < xv.numel(); ++i) s += xv[i];
  return emit(OpKind::kMean, {x.id}, Tensor::scalar(s / static_cast<double>(xv.numel())));
}

Node Graph::mean_per_sample(Node x) {
  const Tensor& xv = value(x);
  if (xv.ndim() < 2) throw ShapeError("mean_per_sample: needs a batch axis");
  const int N = xv.dim(0);
  const long long rest = xv.numel() / N;
  Tensor out({N});
  for (int n = 0; n < N; ++n) {
    double s = 0.0;
    const double* p = xv.data() + static_cast<long long>(n) * rest;
    for (long long i = 0; i < rest; ++i) s += p[i];
    out[n] = s / static_cast<double>(rest);
  }
  return emit(OpKind::kMeanPerSample, {x.id}, std::move(out));
}

Node Graph::l1_mean(Node a, Node b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_same_dims(av, bv, "l1_mean");
  double s = 0.0;
  for (long long i = 0; i < av.numel(); ++i) s += std::abs(av[i] - bv[i]);
  return emit(OpKind::kL1Mean, {a.id, b.id},
              Tensor::scalar(s / static_cast<double>(av.numel())));
}

Node Graph::bias_add(Node x, Node b) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(b);
  if (xv.ndim() != 4 || bv.ndim() != 1 || bv.dim(0) != xv.dim(1))
    throw ShapeError("bias_add: expected [N,C,H,W] + [C], got " + dims_str(xv.dims()) +
                     " + " + dims_str(bv.dims()));
  const long long plane = static_cast<long long>(xv.dim(2)) * xv.dim(3);
  Tensor out(xv.dims());
  long long idx = 0;
  for (int n = 0; n < xv.dim(0); ++n)
    for (int c = 0; c < xv.dim(1); ++c) {
      const double bc = bv[c];
      for (long long i = 0; i < plane; ++i, ++idx) out[idx] = xv[idx] + bc;
    }
  return emit(OpKind::kBiasAdd, {x.id, b.id}, std::move(out));
}

Node Graph::broadcast_hw(Node v, int h, int w) {
  const Tensor& vv = value(v);
  if (vv.ndim() != 2) throw ShapeError("broadcast_hw: expected [N,C], got " + dims_str(vv.dims()));
  const int N = vv.dim(0), C = vv.dim(1);
  Tensor out({N, C, h, w});
  const long long plane = static_cast<long long>(h) * w;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double val = vv[static_cast<long long>(n) * C + c];
      double* p = out.data() + (static_cast<long long>(n) * C + c) * plane;
      std::fill(p, p + plane, val);
    }
  return emit(OpKind::kBroadcastHW, {v.id}, std::move(out), {h, w});
}

Node Graph::conv2d(Node x, Node w, int stride, int padding) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  if (xv.ndim() != 4 || wv.ndim() != 4)
    throw ShapeError("conv2d: expected 4-d input and weight");
  if (xv.dim(1) != wv.dim(1))
    throw ShapeError("conv2d: input channels (axis 1) " + std::to_string(xv.dim(1)) +
                     " != weight in-channels (axis 1) " + std::to_string(wv.dim(1)));
  const int K = wv.dim(2);
  if (wv.dim(3) != K) throw ShapeError("conv2d: non-square kernel");
  if (xv.dim(2) + 2 * padding < K || xv.dim(3) + 2 * padding < K)
    throw ShapeError("conv2d: padded spatial extent smaller than kernel");
  const int N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int Co = wv.dim(0);
  const int Ho = conv_out_extent(H, K, stride, padding);
  const int Wo = conv_out_extent(W, K, stride, padding);
  Tensor out({N, Co, Ho, Wo});
  const int ckk = Ci * K * K;
  const int hw = Ho * Wo;
  std::vector<double> col(static_cast<size_t>(ckk) * hw);
  for (int n = 0; n < N; ++n) {
    im2col(xv.data() + static_cast<long long>(n) * Ci * H * W, Ci, H, W, K, stride,
           padding, Ho, Wo, col.data());
    gemm_nn(Co, hw, ckk, wv.data(), col.data(),
            out.data() + static_cast<long long>(n) * Co * hw, false);
  }
  return emit(OpKind::kConv2d, {x.id, w.id}, std::move(out), {stride, padding});
}

Node Graph::deconv2d(Node x, Node w, int stride, int padding) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  if (xv.ndim() != 4 || wv.ndim() != 4)
    throw ShapeError("deconv2d: expected 4-d input and weight");
  if (xv.dim(1) != wv.dim(0))
    throw ShapeError("deconv2d: input channels (axis 1) " + std::to_string(xv.dim(1)) +
                     " != weight in-channels (axis 0) " + std::to_string(wv.dim(0)));
  const int K = wv.dim(2);
  if (wv.dim(3) != K) throw ShapeError("deconv2d: non-square kernel");
  const int N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int Co = wv.dim(1);
  const int Ho = (H - 1) * stride - 2 * padding + K;
  const int Wo = (W - 1) * stride - 2 * padding + K;
  if (Ho <= 0 || Wo <= 0) throw ShapeError("deconv2d: non-positive output extent");

  // Transposed weight matrix [Co*K*K, Ci]
  std::vector<double> wt(static_cast<size_t>(Co) * K * K * Ci);
  for (int ci = 0; ci < Ci; ++ci)
    for (int co = 0; co < Co; ++co)
      for (int ki = 0; ki < K; ++ki)
        for (int kj = 0; kj < K; ++kj)
          wt[((static_cast<size_t>(co) * K + ki) * K + kj) * Ci + ci] =
              wv[((static_cast<long long>(ci) * Co + co) * K + ki) * K + kj];

  Tensor out({N, Co, Ho, Wo});
  const int hw = H * W;
  std::vector<double> t(static_cast<size_t>(Co) * K * K * hw);
  for (int n = 0; n < N; ++n) {
    gemm_nn(Co * K * K, hw, Ci, wt.data(), xv.data() + static_cast<long long>(n) * Ci * hw,
            t.data(), false);
    col2im(t.data(), Co, Ho, Wo, K, stride, padding, H, W,
           out.data() + static_cast<long long>(n) * Co * Ho * Wo);
  }
  return emit(OpKind::kDeconv2d, {x.id, w.id}, std::move(out), {stride, padding});
}

Node Graph::instance_norm(Node x, double eps) {
  const Tensor& xv = value(x);
  if (xv.ndim() != 4) throw ShapeError("instance_norm: expected [N,C,H,W]");
  const int N = xv.dim(0), C = xv.dim(1);
  const long long m = static_cast<long long>(xv.dim(2)) * xv.dim(3);
  Tensor out(xv.dims());
  Tensor inv({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* p = xv.data() + (static_cast<long long>(n) * C + c) * m;
      double* q = out.data() + (static_cast<long long>(n) * C + c) * m;
      double mu = 0.0;
      for (long long i = 0; i < m; ++i) mu += p[i];
      mu /= static_cast<double>(m);
      double var = 0.0;
      for (long long i = 0; i < m; ++i) var += (p[i] - mu) * (p[i] - mu);
      var /= static_cast<double>(m);
      const double iv = 1.0 / std::sqrt(var + eps);
      inv.at(n, c) = iv;
      for (long long i = 0; i < m; ++i) q[i] = (p[i] - mu) * iv;
    }
  return emit(OpKind::kInstanceNorm, {x.id}, std::move(out), {}, {eps}, std::move(inv));
}

void Graph::accumulate(int id, const Tensor& g) {
  Rec& r = recs_[static_cast<size_t>(id)];
  if (!r.needs_grad) return;
  if (!r.grad.defined()) {
    r.grad = g;
    return;
  }
  for (long long i = 0; i < g.numel(); ++i) r.grad[i] += g[i];
}

void Graph::backprop_node(int id) {
  Rec& r = recs_[static_cast<size_t>(id)];
  const Tensor& g = r.grad;
  auto parent_value = [&](int slot) -> const Tensor& {
    return recs_[static_cast<size_t>(r.parents[static_cast<size_t>(slot)])].value;
  };
  auto parent_needs = [&](int slot) {
    return recs_[static_cast<size_t>(r.parents[static_cast<size_t>(slot)])].needs_grad;
  };
  auto push = [&](int slot, Tensor t) { accumulate(r.parents[static_cast<size_t>(slot)], t); };

  switch (r.kind) {
    case OpKind::kLeaf:
      break;
    case OpKind::kAdd: {
      if (parent_needs(0)) push(0, g);
      if (parent_needs(1)) push(1, g);
      break;
    }
    case OpKind::kSub: {
      if (parent_needs(0)) push(0, g);
      if (parent_needs(1)) {
        Tensor ng(g.dims());
        for (long long i = 0; i < g.numel(); ++i) ng[i] = -g[i];
        push(1, std::move(ng));
      }
      break;
    }
    case OpKind::kMul: {
      const int mode = r.iattrs[0];
      const Tensor& av = parent_value(0);
      const Tensor& bv = parent_value(1);
      if (mode == 0) {
        if (parent_needs(0)) {
          Tensor da(av.dims());
          for (long long i = 0; i < da.numel(); ++i) da[i] = g[i] * bv[i];
          push(0, std::move(da));
        }
        if (parent_needs(1)) {
          Tensor db(bv.dims());
          for (long long i = 0; i < db.numel(); ++i) db[i] = g[i] * av[i];
          push(1, std::move(db));
        }
      } else {
        const int full_slot = mode == 2 ? 1 : 0;
        const int mask_slot = mode == 2 ? 0 : 1;
        const Tensor& full = parent_value(full_slot);
        const Tensor& mask = parent_value(mask_slot);
        const long long plane = static_cast<long long>(full.dim(2)) * full.dim(3);
        const long long slices = full.numel() / plane;
        if (parent_needs(full_slot)) {
          Tensor df(full.dims());
          for (long long s = 0; s < slices; ++s)
            for (long long i = 0; i < plane; ++i)
              df[s * plane + i] = g[s * plane + i] * mask[i];
          push(full_slot, std::move(df));
        }
        if (parent_needs(mask_slot)) {
          Tensor dm(mask.dims());
          for (long long s = 0; s < slices; ++s)
            for (long long i = 0; i < plane; ++i)
              dm[i] += g[s * plane + i] * full[s * plane + i];
          push(mask_slot, std::move(dm));
        }
      }
      break;
    }
    case OpKind::kScale: {
      const double a = r.dattrs[0];
      Tensor dx(g.dims());
      for (long long i = 0; i < g.numel(); ++i) dx[i] = g[i] * a;
      push(0, std::move(dx));
      break;
    }
    case OpKind::kOffset:
      push(0, g);
      break;
    case OpKind::kAbs: {
      const Tensor& xv = parent_value(0);
      Tensor dx(g.dims());
      for (long long i = 0; i < g.numel(); ++i)
        dx[i] = xv[i] > 0.0 ? g[i] : (xv[i] < 0.0 ? -g[i] : 0.0);
      push(0, std::move(dx));
      break;
    }
    case OpKind::kRelu: {
      const Tensor& xv = parent_value(0);
      Tensor dx(g.dims());
      for (long long i = 0; i < g.numel(); ++i) dx[i] = xv[i] > 0.0 ? g[i] : 0.0;
      push(0, std::move(dx));
      break;
    }
    case OpKind::kLeakyRelu: {
      const double slope = r.dattrs[0];
      const Tensor& xv = parent_value(0);
      Tensor dx(g.dims());
      for (long long i = 0; i < g.numel(); ++i)
        dx[i] = xv[i] > 0.0 ? g[i] : slope * g[i];
      push(0, std::move(dx));
      break;
    }
    case OpKind::kTanh: {
      Tensor dx(g.dims());
      for (long long i = 0; i < g.numel(); ++i)
        dx[i] = g[i] * (1.0 - r.value[i] * r.value[i]);
      push(0, std::move(dx));
      break;
    }
    case OpKind::kSigmoid: {
      Tensor dx(g.dims());
      for (long long i = 0; i < g.numel(); ++i)
        dx[i] = g[i] * r.value[i] * (1.0 - r.value[i]);
      push(0, std::move(dx));
      break;
    }
    case OpKind::kLogClamped: {
      const double eps = r.dattrs[0];
      const Tensor& xv = parent_value(0);
      Tensor dx(g.dims());
      for (long long i = 0; i < g.numel(); ++i)
        dx[i] = xv[i] > eps ? g[i] / xv[i] : 0.0;
      push(0, std::move(dx));
      break;
    }
    case OpKind::kFlipW: {
      const int W = g.dim(g.ndim() - 1);
      const long long rows = g.numel() / W;
      Tensor dx(g.dims());
      for (long long rr = 0; rr < rows; ++rr)
        for (int w = 0; w < W; ++w) dx[rr * W + w] = g[rr * W + (W - 1 - w)];
      push(0, std::move(dx));
      break;
    }
    case OpKind::kConcat: {
      const int axis = r.iattrs[0];
      const int nd = r.value.ndim();
      long long outer = 1;
      for (int d = 0; d < axis; ++d) outer *= r.value.dim(d);
      long long inner = 1;
      for (int d = axis + 1; d < nd; ++d) inner *= r.value.dim(d);
      const long long g_block = static_cast<long long>(r.value.dim(axis)) * inner;
      long long off = 0;
      for (size_t pi = 0; pi < r.parents.size(); ++pi) {
        const Tensor& pv = recs_[static_cast<size_t>(r.parents[pi])].value;
        const long long blk = static_cast<long long>(pv.dim(axis)) * inner;
        if (recs_[static_cast<size_t>(r.parents[pi])].needs_grad) {
          Tensor dp(pv.dims());
          for (long long o = 0; o < outer; ++o)
            std::memcpy(dp.data() + o * blk, g.data() + o * g_block + off,
                        sizeof(double) * static_cast<size_t>(blk));
          accumulate(r.parents[pi], dp);
        }
        off += blk;
      }
      break;
    }
    case OpKind::kSlice: {
      const int axis = r.iattrs[0], start = r.iattrs[1], len = r.iattrs[2];
      const Tensor& xv = parent_value(0);
      const int nd = xv.ndim();
      long long outer = 1;
      for (int d = 0; d < axis; ++d) outer *= xv.dim(d);
      long long inner = 1;
      for (int d = axis + 1; d < nd; ++d) inner *= xv.dim(d);
      const long long in_block = static_cast<long long>(xv.dim(axis)) * inner;
      const long long out_block = static_cast<long long>(len) * inner;
      Tensor dx(xv.dims());
      for (long long o = 0; o < outer; ++o)
        std::memcpy(dx.data() + o * in_block + start * inner, g.data() + o * out_block,
                    sizeof(double) * static_cast<size_t>(out_block));
      push(0, std::move(dx));
      break;
    }
    case OpKind::kSum: {
      const Tensor& xv = parent_value(0);
      push(0, Tensor::full(xv.dims(), g[0]));
      break;
    }
    case OpKind::kMean: {
      const Tensor& xv = parent_value(0);
      push(0, Tensor::full(xv.dims(), g[0] / static_cast<double>(xv.numel())));
      break;
    }
    case OpKind::kMeanPerSample: {
      const Tensor& xv = parent_value(0);
      const int N = xv.dim(0);
      const long long rest = xv.numel() / N;
      Tensor dx(xv.dims());
      for (int n = 0; n < N; ++n) {
        const double v = g[n] / static_cast<double>(rest);
        double* p = dx.data() + static_cast<long long>(n) * rest;
        std::fill(p, p + rest, v);
      }
      push(0, std::move(dx));
      break;
    }
    case OpKind::kL1Mean: {
      const Tensor& av = parent_value(0);
      const Tensor& bv = parent_value(1);
      const double go = g[0] / static_cast<double>(av.numel());
      if (parent_needs(0)) {
        Tensor da(av.dims());
        for (long long i = 0; i < av.numel(); ++i) {
          const double d = av[i] - bv[i];
          da[i] = d > 0.0 ? go : (d < 0.0 ? -go : 0.0);
        }
        push(0, std::move(da));
      }
      if (parent_needs(1)) {
        Tensor db(bv.dims());
        for (long long i = 0; i < bv.numel(); ++i) {
          const double d = av[i] - bv[i];
          db[i] = d > 0.0 ? -go : (d < 0.0 ? go : 0.0);
        }
        push(1, std::move(db));
      }
      break;
    }
    case OpKind::kBiasAdd: {
      if (parent_needs(0)) push(0, g);
      if (parent_needs(1)) {
        const Tensor& bv = parent_value(1);
        const int N = g.dim(0), C = g.dim(1);
        const long long plane = static_cast<long long>(g.dim(2)) * g.dim(3);
        Tensor db(bv.dims());
        long long idx = 0;
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            double s = 0.0;
            for (long long i = 0; i < plane; ++i, ++idx) s += g[idx];
            db[c] += s;
          }
        push(1, std::move(db));
      }
      break;
    }
    case OpKind::kBroadcastHW: {
      const Tensor& vv = parent_value(0);
      const long long plane = static_cast<long long>(r.iattrs[0]) * r.iattrs[1];
      Tensor dv(vv.dims());
      for (long long s = 0; s < vv.numel(); ++s) {
        double acc = 0.0;
        const double* p = g.data() + s * plane;
        for (long long i = 0; i < plane; ++i) acc += p[i];
        dv[s] = acc;
      }
      push(0, std::move(dv));
      break;
    }
    case OpKind::kConv2d: {
      const int stride = r.iattrs[0], padding = r.iattrs[1];
      const Tensor& xv = parent_value(0);
      const Tensor& wv = parent_value(1);
      const int N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
      const int Co = wv.dim(0), K = wv.dim(2);
      const int Ho = g.dim(2), Wo = g.dim(3);
      const int ckk = Ci * K * K;
      const int hw = Ho * Wo;
      const bool need_x = parent_needs(0);
      const bool need_w = parent_needs(1);
      Tensor dx = need_x ? Tensor(xv.dims()) : Tensor();
      Tensor dw = need_w ? Tensor(wv.dims()) : Tensor();
      std::vector<double> col(static_cast<size_t>(ckk) * hw);
      std::vector<double> dcol(need_x ? static_cast<size_t>(ckk) * hw : 0);
      for (int n = 0; n < N; ++n) {
        const double* gy = g.data() + static_cast<long long>(n) * Co * hw;
        if (need_w) {
          im2col(xv.data() + static_cast<long long>(n) * Ci * H * W, Ci, H, W, K,
                 stride, padding, Ho, Wo, col.data());
          gemm_nt(Co, ckk, hw, gy, col.data(), dw.data(), true);
        }
        if (need_x) {
          gemm_tn(ckk, hw, Co, wv.data(), gy, dcol.data(), false);
          col2im(dcol.data(), Ci, H, W, K, stride, padding, Ho, Wo,
                 dx.data() + static_cast<long long>(n) * Ci * H * W);
        }
      }
      if (need_x) push(0, std::move(dx));
      if (need_w) push(1, std::move(dw));
      break;
    }
    case OpKind::kDeconv2d: {
      const int stride = r.iattrs[0], padding = r.iattrs[1];
      const Tensor& xv = parent_value(0);
      const Tensor& wv = parent_value(1);
      const int N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
      const int Co = wv.dim(1), K = wv.dim(2);
      const int Ho = r.value.dim(2), Wo = r.value.dim(3);
      const int hw = H * W;
      const int cokk = Co * K * K;
      const bool need_x = parent_needs(0);
      const bool need_w = parent_needs(1);
      Tensor dx = need_x ? Tensor(xv.dims()) : Tensor();
      std::vector<double> dwt(need_w ? static_cast<size_t>(cokk) * Ci : 0);
      std::vector<double> wt;
      if (need_x) {
        wt.resize(static_cast<size_t>(cokk) * Ci);
        for (int ci = 0; ci < Ci; ++ci)
          for (int co = 0; co < Co; ++co)
            for (int ki = 0; ki < K; ++ki)
              for (int kj = 0; kj < K; ++kj)
                wt[((static_cast<size_t>(co) * K + ki) * K + kj) * Ci + ci] =
                    wv[((static_cast<long long>(ci) * Co + co) * K + ki) * K + kj];
      }
      std::vector<double> dt(static_cast<size_t>(cokk) * hw);
      for (int n = 0; n < N; ++n) {
        im2col(g.data() + static_cast<long long>(n) * Co * Ho * Wo, Co, Ho, Wo, K,
               stride, padding, H, W, dt.data());
        if (need_x)
          gemm_tn(Ci, hw, cokk, wt.data(), dt.data(),
                  dx.data() + static_cast<long long>(n) * Ci * hw, false);
        if (need_w)
          gemm_nt(cokk, Ci, hw, dt.data(), xv.data() + static_cast<long long>(n) * Ci * hw,
                  dwt.data(), true);
      }
      if (need_x) push(0, std::move(dx));
      if (need_w) {
        Tensor dw(wv.dims());
        for (int ci = 0; ci < Ci; ++ci)
          for (int co = 0; co < Co; ++co)
            for (int ki = 0; ki < K; ++ki)
              for (int kj = 0; kj < K; ++kj)
                dw[((static_cast<long long>(ci) * Co + co) * K + ki) * K + kj] =
                    dwt[((static_cast<size_t>(co) * K + ki) * K + kj) * Ci + ci];
        push(1, std::move(dw));
      }
      break;
    }
    case OpKind::kInstanceNorm: {
      const Tensor& xv = parent_value(0);
      const int N = xv.dim(0), C = xv.dim(1);
      const long long m = static_cast<long long>(xv.dim(2)) * xv.dim(3);
      Tensor dx(xv.dims());
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const long long base = (static_cast<long long>(n) * C + c) * m;
          const double* go = g.data() + base;
          const double* xh = r.value.data() + base;
          const double iv = r.aux.at(n, c);
          double mg = 0.0, mgx = 0.0;
          for (long long i = 0; i < m; ++i) {
            mg += go[i];
            mgx += go[i] * xh[i];
          }
          mg /= static_cast<double>(m);
          mgx /= static_cast<double>(m);
          double* out = dx.data() + base;
          for (long long i = 0; i < m; ++i) out[i] = iv * (go[i] - mg - xh[i] * mgx);
        }
      push(0, std::move(dx));
      break;
    }
  }
}

void Graph::backward(Node loss) {
  if (backward_done_)
    throw UsageError("backward: one backward pass per forward pass");
  Rec& lr = mutable_rec(loss);
  if (lr.value.numel() != 1)
    throw UsageError("backward: loss must be scalar, got " + dims_str(lr.value.dims()));
  if (!lr.needs_grad)
    throw UsageError("backward: loss is detached from every gradient-tracked leaf");
  lr.grad = Tensor::scalar(1.0);
  for (int id = loss.id; id >= 0; --id) {
    Rec& r = recs_[static_cast<size_t>(id)];
    if (!r.needs_grad || !r.grad.defined()) continue;
    backprop_node(id);
  }
  // Materialize zero grads for tracked leaves the loss never reached.
  for (Rec& r : recs_)
    if (r.needs_grad && !r.grad.defined()) r.grad = Tensor(r.value.dims());
  backward_done_ = true;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void AdamState::init(const std::vector<const Tensor*>& params) {
  m.clear();
  v.clear();
  for (const Tensor* p : params) {
    m.emplace_back(p->dims());
    v.emplace_back(p->dims());
  }
  step = 0;
}

std::vector<Tensor> adam_step(AdamState& state, const std::vector<const Tensor*>& params,
                              const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw UsageError("adam_step: parameter/gradient/state count mismatch");
  state.step += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (size_t k = 0; k < params.size(); ++k) {
    const Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    if (!p.same_dims(g) || !p.same_dims(state.m[k]))
      throw ShapeError("adam_step: dims mismatch at parameter " + std::to_string(k));
    Tensor np(p.dims());
    Tensor& mk = state.m[k];
    Tensor& vk = state.v[k];
    for (long long i = 0; i < p.numel(); ++i) {
      mk[i] = b1 * mk[i] + (1.0 - b1) * g[i];
      vk[i] = b2 * vk[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = mk[i] / bc1;
      const double vhat = vk[i] / bc2;
      np[i] = p[i] - state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
    out.push_back(std::move(np));
  }
  return out;
}

}  // namespace uvface
