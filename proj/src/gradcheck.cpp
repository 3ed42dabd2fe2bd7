#include "uvface/gradcheck.hpp"

#include <cmath>

namespace uvface {

namespace {

double forward_only(const GradBuildFn& build, const std::vector<Tensor>& leaves) {
  Graph g;
  std::vector<Node> nodes;
  nodes.reserve(leaves.size());
  for (const Tensor& t : leaves) nodes.push_back(g.constant(t));
  return g.value(build(g, nodes))[0];
}

double rel_err(double ad, double fd) {
  return std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-6});
}

// Random values kept away from the kinks of relu/abs so finite differences
// stay valid.
Tensor away_from_zero(Dims dims, Rng& rng) {
  Tensor t(std::move(dims));
  for (long long i = 0; i < t.numel(); ++i) {
    double v = rng.uniform(0.1, 1.0);
    t[i] = rng.uniform() < 0.5 ? -v : v;
  }
  return t;
}

}  // namespace

double max_rel_err_fd(const GradBuildFn& build, const std::vector<Tensor>& leaves,
                      double h) {
  Graph g;
  std::vector<Node> nodes;
  nodes.reserve(leaves.size());
  for (const Tensor& t : leaves) nodes.push_back(g.param(t));
  Node loss = build(g, nodes);
  if (g.value(loss).numel() != 1) throw UsageError("max_rel_err_fd: loss must be scalar");
  g.backward(loss);

  double worst = 0.0;
  std::vector<Tensor> work = leaves;
  for (size_t li = 0; li < leaves.size(); ++li) {
    const Tensor& ad = g.grad(nodes[li]);
    for (long long i = 0; i < work[li].numel(); ++i) {
      const double orig = work[li][i];
      work[li][i] = orig + h;
      const double lp = forward_only(build, work);
      work[li][i] = orig - h;
      const double lm = forward_only(build, work);
      work[li][i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      worst = std::max(worst, rel_err(ad[i], fd));
    }
  }
  return worst;
}

std::vector<GradCheckEntry> gradcheck_core_ops(uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckEntry> out;
  auto check = [&](const std::string& name, const GradBuildFn& build,
                   std::vector<Tensor> leaves) {
    out.push_back({name, max_rel_err_fd(build, leaves)});
  };

  Tensor x4 = away_from_zero({1, 2, 4, 4}, rng);
  Tensor y4 = away_from_zero({1, 2, 4, 4}, rng);

  check("add", [](Graph& g, const std::vector<Node>& n) { return g.sum(g.add(n[0], n[1])); },
        {x4, y4});
  check("sub",
        [](Graph& g, const std::vector<Node>& n) {
          return g.sum(g.mul(g.sub(n[0], n[1]), n[0]));
        },
        {x4, y4});
  check("mul", [](Graph& g, const std::vector<Node>& n) { return g.sum(g.mul(n[0], n[1])); },
        {x4, y4});
  check("mul_mask",
        [](Graph& g, const std::vector<Node>& n) { return g.sum(g.mul(n[0], n[1])); },
        {away_from_zero({2, 3, 3, 3}, rng), away_from_zero({1, 1, 3, 3}, rng)});
  check("scale_offset",
        [](Graph& g, const std::vector<Node>& n) {
          return g.sum(g.offset(g.scale(n[0], 1.7), -0.3));
        },
        {x4});
  check("abs", [](Graph& g, const std::vector<Node>& n) { return g.sum(g.abs(n[0])); }, {x4});
  check("relu", [](Graph& g, const std::vector<Node>& n) { return g.sum(g.relu(n[0])); },
        {x4});
  check("leaky_relu",
        [](Graph& g, const std::vector<Node>& n) { return g.sum(g.leaky_relu(n[0], 0.02)); },
        {x4});
  check("tanh", [](Graph& g, const std::vector<Node>& n) { return g.sum(g.tanh(n[0])); },
        {x4});
  check("sigmoid",
        [](Graph& g, const std::vector<Node>& n) { return g.sum(g.sigmoid(n[0])); }, {x4});
  check("log_clamped",
        [](Graph& g, const std::vector<Node>& n) { return g.sum(g.log_clamped(n[0])); },
        {random_uniform({2, 3}, rng, 0.2, 1.0)});
  check("flip_w",
        [](Graph& g, const std::vector<Node>& n) {
          return g.sum(g.mul(g.flip_w(n[0]), n[1]));
        },
        {x4, y4});
  check("concat",
        [](Graph& g, const std::vector<Node>& n) {
          Node c = g.concat({n[0], n[1]}, 1);
          return g.sum(g.mul(c, c));
        },
        {away_from_zero({1, 2, 3, 3}, rng), away_from_zero({1, 3, 3, 3}, rng)});
  check("slice",
        [](Graph& g, const std::vector<Node>& n) {
          Node s = g.slice(n[0], 2, 1, 2);
          return g.sum(g.mul(s, s));
        },
        {x4});
  check("mean", [](Graph& g, const std::vector<Node>& n) { return g.mean(n[0]); }, {x4});
  check("mean_per_sample",
        [](Graph& g, const std::vector<Node>& n) {
          Node m = g.mean_per_sample(n[0]);
          return g.sum(g.mul(m, m));
        },
        {away_from_zero({3, 2, 2, 2}, rng)});
  check("l1_mean",
        [](Graph& g, const std::vector<Node>& n) { return g.l1_mean(n[0], n[1]); },
        {x4, y4});
  check("bias_add",
        [](Graph& g, const std::vector<Node>& n) {
          return g.sum(g.tanh(g.bias_add(n[0], n[1])));
        },
        {x4, away_from_zero({2}, rng)});
  check("broadcast_hw",
        [](Graph& g, const std::vector<Node>& n) {
          Node b = g.broadcast_hw(n[0], 3, 3);
          return g.sum(g.mul(b, b));
        },
        {away_from_zero({2, 4}, rng)});
  check("conv2d",
        [](Graph& g, const std::vector<Node>& n) {
          return g.sum(g.tanh(g.conv2d(n[0], n[1], 1, 1)));
        },
        {away_from_zero({1, 2, 5, 5}, rng), random_normal({3, 2, 3, 3}, rng, 0.0, 0.4)});
  check("conv2d_strided",
        [](Graph& g, const std::vector<Node>& n) {
          return g.sum(g.conv2d(n[0], n[1], 2, 1));
        },
        {away_from_zero({2, 2, 4, 4}, rng), random_normal({2, 2, 4, 4}, rng, 0.0, 0.4)});
  check("deconv2d",
        [](Graph& g, const std::vector<Node>& n) {
          return g.sum(g.tanh(g.deconv2d(n[0], n[1], 2, 1)));
        },
        {away_from_zero({1, 2, 3, 3}, rng), random_normal({2, 2, 4, 4}, rng, 0.0, 0.4)});
  check("instance_norm",
        [](Graph& g, const std::vector<Node>& n) {
          Node y = g.instance_norm(n[0], 1e-5);
          return g.sum(g.mul(g.tanh(y), n[1]));
        },
        {random_normal({2, 2, 3, 4}, rng), random_normal({2, 2, 3, 4}, rng)});
  check("hourglass_composite",
        [](Graph& g, const std::vector<Node>& n) {
          Node h = g.relu(g.instance_norm(g.bias_add(g.conv2d(n[0], n[1], 2, 1), n[2])));
          Node up = g.deconv2d(h, n[3], 2, 1);
          Node y = g.tanh(g.add(up, n[0]));
          return g.l1_mean(y, g.scale(n[0], 0.2));
        },
        {away_from_zero({1, 2, 4, 4}, rng), random_normal({3, 2, 3, 3}, rng, 0.0, 0.4),
         random_normal({3}, rng, 0.0, 0.1), random_normal({3, 2, 4, 4}, rng, 0.0, 0.4)});
  return out;
}

}  // namespace uvface
