#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dgnet/tensor.hpp"

namespace dgnet {

// Reverse-mode automatic differentiation on Tensor values.
//
// Var is a cheap handle to a graph node. Ops build the graph eagerly; calling
// backward(loss) runs one reverse sweep, accumulating into .grad() of every
// node that requires gradients. A fresh DAG is built per training step.

struct VarNode {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<VarNode>> parents;
  // Propagates this node's grad into the parents' grads.
  std::function<void(VarNode&)> backprop;

  void ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor(value.shape());
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false)
      : node_(std::make_shared<VarNode>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  Tensor& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() {
    node_->ensure_grad();
    node_->grad.fill(0.0);
  }

  // Same value, cut off from the graph.
  Var detach() const { return Var(node_->value, false); }

  std::shared_ptr<VarNode> node() const { return node_; }

 private:
  std::shared_ptr<VarNode> node_;
};

namespace detail {

inline Var make_op(Tensor value, std::vector<Var> inputs,
                   std::function<void(VarNode&)> backprop) {
  bool any_grad = false;
  for (const Var& v : inputs) any_grad = any_grad || v.requires_grad();
  Var out(std::move(value), any_grad);
  if (any_grad) {
    for (const Var& v : inputs) out.node()->parents.push_back(v.node());
    out.node()->backprop = std::move(backprop);
  }
  return out;
}

}  // namespace detail

// Runs the reverse sweep from a scalar root. Gradients accumulate, so callers
// zero parameter grads between steps.
inline void backward(const Var& root) {
  if (root.value().size() != 1)
    throw ShapeMismatchError("backward: root must be a scalar, got " + root.value().shape_str());
  if (!root.requires_grad()) return;

  // Iterative post-order DFS: children before parents in `order`.
  std::vector<VarNode*> order;
  std::unordered_set<VarNode*> seen;
  std::vector<std::pair<VarNode*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      VarNode* parent = node->parents[next++].get();
      if (parent->requires_grad && !seen.count(parent)) {
        seen.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (VarNode* n : order) n->ensure_grad();
  root.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    VarNode* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return detail::make_op(std::move(out), {a, b}, [](VarNode& n) {
    for (int p = 0; p < 2; ++p) {
      VarNode& parent = *n.parents[p];
      if (!parent.requires_grad) continue;
      for (std::size_t i = 0; i < n.grad.size(); ++i) parent.grad[i] += n.grad[i];
    }
  });
}

inline Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return detail::make_op(std::move(out), {a, b}, [](VarNode& n) {
    VarNode& pa = *n.parents[0];
    VarNode& pb = *n.parents[1];
    if (pa.requires_grad)
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
  });
}

inline Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return detail::make_op(std::move(out), {a}, [s](VarNode& n) {
    VarNode& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += s * n.grad[i];
  });
}

inline Var leaky_relu(const Var& x, double slope) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] *= slope;
  return detail::make_op(std::move(out), {x}, [slope](VarNode& n) {
    VarNode& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      p.grad[i] += (p.value[i] > 0.0 ? 1.0 : slope) * n.grad[i];
  });
}

inline Var relu(const Var& x) { return leaky_relu(x, 0.0); }

inline Var tanh_op(const Var& x) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return detail::make_op(std::move(out), {x}, [](VarNode& n) {
    VarNode& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double t = n.value[i];
      p.grad[i] += (1.0 - t * t) * n.grad[i];
    }
  });
}

// log(1 + e^x), numerically stable at both tails.
inline Var softplus(const Var& x) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    out[i] = v > 30.0 ? v : std::log1p(std::exp(std::min(v, 30.0)));
  }
  return detail::make_op(std::move(out), {x}, [](VarNode& n) {
    VarNode& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double v = p.value[i];
      const double sig = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      p.grad[i] += sig * n.grad[i];
    }
  });
}

inline Var mean_all(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  Tensor out = Tensor::scalar(x.value().sum() / n);
  return detail::make_op(std::move(out), {x}, [n](VarNode& node) {
    VarNode& p = *node.parents[0];
    if (!p.requires_grad) return;
    const double g = node.grad[0] / n;
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
  });
}

// mean((x - c)^2), the least-squares building block.
inline Var mse_to_const(const Var& x, double c) {
  const double n = static_cast<double>(x.value().size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.value().size(); ++i) {
    const double d = x.value()[i] - c;
    acc += d * d;
  }
  return detail::make_op(Tensor::scalar(acc / n), {x}, [c, n](VarNode& node) {
    VarNode& p = *node.parents[0];
    if (!p.requires_grad) return;
    const double g = node.grad[0] * 2.0 / n;
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g * (p.value[i] - c);
  });
}

// mean(|a - b|). Subgradient at ties is 0.
inline Var l1_mean(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "l1_mean");
  const double n = static_cast<double>(a.value().size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i)
    acc += std::abs(a.value()[i] - b.value()[i]);
  return detail::make_op(Tensor::scalar(acc / n), {a, b}, [n](VarNode& node) {
    VarNode& pa = *node.parents[0];
    VarNode& pb = *node.parents[1];
    const double g = node.grad[0] / n;
    for (std::size_t i = 0; i < pa.value.size(); ++i) {
      const double d = pa.value[i] - pb.value[i];
      const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      if (pa.requires_grad) pa.grad[i] += g * s;
      if (pb.requires_grad) pb.grad[i] -= g * s;
    }
  });
}

// sum over (c, y, x) of w[y,x] * |a - b| divided by (C * sum(w)).
// `weight` has shape (H, W) and broadcasts over channels; it is a constant.
inline Var l1_mean_weighted(const Var& a, const Var& b, const Tensor& weight) {
  require_same_shape(a.value(), b.value(), "l1_mean_weighted");
  if (a.value().rank() != 3 || weight.rank() != 2 || weight.dim(0) != a.value().dim(1) ||
      weight.dim(1) != a.value().dim(2))
    throw ShapeMismatchError("l1_mean_weighted: weight " + weight.shape_str() +
                             " does not broadcast over " + a.value().shape_str());
  const double wsum = weight.sum();
  if (!(wsum > 0.0)) throw Error("l1_mean_weighted: weights sum to zero");
  const int channels = a.value().dim(0);
  const std::size_t plane = weight.size();
  const double denom = wsum * channels;
  double acc = 0.0;
  for (int c = 0; c < channels; ++c)
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t i = c * plane + p;
      acc += weight[p] * std::abs(a.value()[i] - b.value()[i]);
    }
  auto wt = std::make_shared<Tensor>(weight);
  return detail::make_op(
      Tensor::scalar(acc / denom), {a, b}, [wt, denom, channels, plane](VarNode& node) {
        VarNode& pa = *node.parents[0];
        VarNode& pb = *node.parents[1];
        const double g = node.grad[0] / denom;
        for (int c = 0; c < channels; ++c)
          for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t i = c * plane + p;
            const double d = pa.value[i] - pb.value[i];
            const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            const double gi = g * (*wt)[p] * s;
            if (pa.requires_grad) pa.grad[i] += gi;
            if (pb.requires_grad) pb.grad[i] -= gi;
          }
      });
}

// Scalar combination sum_i coeffs[i] * parts[i]; every part must be scalar.
inline Var weighted_sum(const std::vector<Var>& parts, const std::vector<double>& coeffs) {
  if (parts.size() != coeffs.size() || parts.empty())
    throw ShapeMismatchError("weighted_sum: parts/coeffs size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].value().size() != 1)
      throw ShapeMismatchError("weighted_sum: part " + std::to_string(i) + " is not scalar");
    acc += coeffs[i] * parts[i].value()[0];
  }
  return detail::make_op(Tensor::scalar(acc), parts, [coeffs](VarNode& node) {
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      VarNode& p = *node.parents[i];
      if (p.requires_grad) p.grad[0] += coeffs[i] * node.grad[0];
    }
  });
}

// ---------------------------------------------------------------------------
// Structured ops: convolution, upsampling, concatenation
// ---------------------------------------------------------------------------

namespace detail {

inline void conv2d_accumulate(const Tensor& x, const Tensor& w, Tensor& out, int stride,
                              int pad) {
  const int in_c = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
  const int out_c = w.dim(0), k = w.dim(2);
  const int out_h = out.dim(1), out_w = out.dim(2);
  for (int oc = 0; oc < out_c; ++oc)
    for (int ic = 0; ic < in_c; ++ic)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const double wv = w.at(oc, ic, ky, kx);
          if (wv == 0.0) continue;
          const int off = kx - pad;
          const int ox_lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
          const int ox_hi = std::min(out_w, off < in_w ? (in_w - 1 - off) / stride + 1 : 0);
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= in_h) continue;
            const double* xrow = &x.at(ic, iy, 0);
            double* orow = &out.at(oc, oy, 0);
            for (int ox = ox_lo; ox < ox_hi; ++ox)
              orow[ox] += wv * xrow[ox * stride + off];
          }
        }
}

}  // namespace detail

// 2-D convolution. x: (Cin,H,W), w: (Cout,Cin,K,K), b: (Cout).
inline Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 3 || wv.rank() != 4 || bv.rank() != 1)
    throw ShapeMismatchError("conv2d: expected x rank 3, w rank 4, b rank 1");
  if (wv.dim(1) != xv.dim(0))
    throw ShapeMismatchError("conv2d: input channels " + xv.shape_str() + " vs weight " +
                             wv.shape_str());
  if (wv.dim(0) != bv.dim(0)) throw ShapeMismatchError("conv2d: bias/weight channel mismatch");
  if (wv.dim(2) != wv.dim(3)) throw ShapeMismatchError("conv2d: kernel must be square");
  const int in_h = xv.dim(1), in_w = xv.dim(2), k = wv.dim(2);
  const int out_h = (in_h + 2 * pad - k) / stride + 1;
  const int out_w = (in_w + 2 * pad - k) / stride + 1;
  if (out_h <= 0 || out_w <= 0)
    throw ShapeMismatchError("conv2d: input " + xv.shape_str() + " too small for kernel");

  Tensor out({wv.dim(0), out_h, out_w});
  for (int oc = 0; oc < wv.dim(0); ++oc) {
    double* plane = &out.at(oc, 0, 0);
    const double bias = bv[oc];
    for (int i = 0; i < out_h * out_w; ++i) plane[i] = bias;
  }
  detail::conv2d_accumulate(xv, wv, out, stride, pad);

  return detail::make_op(std::move(out), {x, w, b}, [stride, pad](VarNode& n) {
    VarNode& px = *n.parents[0];
    VarNode& pw = *n.parents[1];
    VarNode& pb = *n.parents[2];
    const Tensor& xv = px.value;
    const Tensor& wv = pw.value;
    const Tensor& g = n.grad;
    const int in_c = xv.dim(0), in_h = xv.dim(1), in_w = xv.dim(2);
    const int out_c = wv.dim(0), k = wv.dim(2);
    const int out_h = g.dim(1), out_w = g.dim(2);

    if (pb.requires_grad) {
      for (int oc = 0; oc < out_c; ++oc) {
        const double* plane = &g.at(oc, 0, 0);
        double acc = 0.0;
        for (int i = 0; i < out_h * out_w; ++i) acc += plane[i];
        pb.grad[oc] += acc;
      }
    }
    for (int oc = 0; oc < out_c; ++oc)
      for (int ic = 0; ic < in_c; ++ic)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const int off = kx - pad;
            const int ox_lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
            const int ox_hi = std::min(out_w, off < in_w ? (in_w - 1 - off) / stride + 1 : 0);
            const double wvv = wv.at(oc, ic, ky, kx);
            double wg = 0.0;
            for (int oy = 0; oy < out_h; ++oy) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= in_h) continue;
              const double* grow = &g.at(oc, oy, 0);
              const double* xrow = &xv.at(ic, iy, 0);
              double* gxrow = px.requires_grad ? &px.grad.at(ic, iy, 0) : nullptr;
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                const double gv = grow[ox];
                wg += gv * xrow[ox * stride + off];
                if (gxrow) gxrow[ox * stride + off] += wvv * gv;
              }
            }
            if (pw.requires_grad) pw.grad.at(oc, ic, ky, kx) += wg;
          }
  });
}

// Nearest-neighbour 2x upsampling.
inline Var upsample_nearest2(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ShapeMismatchError("upsample_nearest2: expected rank-3 input");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < 2 * h; ++y) {
      const double* src = &xv.at(ch, y / 2, 0);
      double* dst = &out.at(ch, y, 0);
      for (int xcol = 0; xcol < 2 * w; ++xcol) dst[xcol] = src[xcol / 2];
    }
  return detail::make_op(std::move(out), {x}, [](VarNode& n) {
    VarNode& p = *n.parents[0];
    if (!p.requires_grad) return;
    const int c = p.value.dim(0), h = p.value.dim(1), w = p.value.dim(2);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < 2 * h; ++y) {
        double* dst = &p.grad.at(ch, y / 2, 0);
        const double* src = &n.grad.at(ch, y, 0);
        for (int xcol = 0; xcol < 2 * w; ++xcol) dst[xcol / 2] += src[xcol];
      }
  });
}

// Channel-axis concatenation of two feature maps with equal spatial dims.
inline Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
    throw ShapeMismatchError("concat_channels: " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
  std::copy(av.data(), av.data() + av.size(), out.data());
  std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
  return detail::make_op(std::move(out), {a, b}, [](VarNode& n) {
    VarNode& pa = *n.parents[0];
    VarNode& pb = *n.parents[1];
    const std::size_t na = pa.value.size();
    if (pa.requires_grad)
      for (std::size_t i = 0; i < na; ++i) pa.grad[i] += n.grad[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < pb.value.size(); ++i) pb.grad[i] += n.grad[na + i];
  });
}

}  // namespace dgnet
