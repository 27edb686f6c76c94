#include "tfg/nn/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace tfg::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->parents = std::move(parents);
  for (const Var& p : node->parents)
    if (p->requires_grad) node->requires_grad = true;
  if (node->requires_grad) node->backward_fn = std::move(backward_fn);
  return node;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a->value.shape_str() + " vs " + b->value.shape_str());
}

// Elementwise unary op: y = f(x), dx += df(x, y, gy).
template <typename F, typename DF>
Var unary_op(const Var& x, F f, DF df) {
  Tensor out(x->value.shape());
  for (long i = 0; i < out.numel(); ++i) out[i] = f(x->value[i]);
  Var xp = x;
  return make_node(std::move(out), {x}, [xp, df](Node& n) {
    if (!xp->requires_grad) return;
    Tensor& gx = xp->ensure_grad();
    for (long i = 0; i < gx.numel(); ++i)
      gx[i] += df(xp->value[i], n.value[i], n.grad[i]);
  });
}

}  // namespace

Var constant(Tensor v) {
  auto node = std::make_shared<Node>();
  node->value = std::move(v);
  node->requires_grad = false;
  return node;
}

Var parameter(Tensor v) {
  auto node = std::make_shared<Node>();
  node->value = std::move(v);
  node->requires_grad = true;
  return node;
}

void backward(const Var& root) {
  if (root->value.numel() != 1)
    throw std::logic_error("backward: root must be a scalar");
  // Post-order DFS: parents precede children in `topo`.
  std::vector<Var> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Var, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Var child = node->parents[next++];
      if (child->requires_grad && !visited.count(child.get())) {
        visited.insert(child.get());
        stack.emplace_back(std::move(child), 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad().fill(1.0);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node& n = **it;
    if (n.backward_fn && n.requires_grad && !n.grad.empty()) n.backward_fn(n);
  }
}

void zero_grad(const std::vector<Var>& params) {
  for (const Var& p : params)
    if (!p->grad.empty()) p->grad.fill(0.0);
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out(a->value.shape());
  for (long i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  Var ap = a, bp = b;
  return make_node(std::move(out), {a, b}, [ap, bp](Node& n) {
    if (ap->requires_grad) {
      Tensor& g = ap->ensure_grad();
      for (long i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (bp->requires_grad) {
      Tensor& g = bp->ensure_grad();
      for (long i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a->value.shape());
  for (long i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
  Var ap = a, bp = b;
  return make_node(std::move(out), {a, b}, [ap, bp](Node& n) {
    if (ap->requires_grad) {
      Tensor& g = ap->ensure_grad();
      for (long i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (bp->requires_grad) {
      Tensor& g = bp->ensure_grad();
      for (long i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a->value.shape());
  for (long i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  Var ap = a, bp = b;
  return make_node(std::move(out), {a, b}, [ap, bp](Node& n) {
    if (ap->requires_grad) {
      Tensor& g = ap->ensure_grad();
      for (long i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * bp->value[i];
    }
    if (bp->requires_grad) {
      Tensor& g = bp->ensure_grad();
      for (long i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * ap->value[i];
    }
  });
}

Var affine(const Var& x, double a, double b) {
  return unary_op(
      x, [a, b](double v) { return a * v + b; },
      [a](double, double, double g) { return a * g; });
}

Var neg(const Var& x) { return affine(x, -1.0, 0.0); }

Var relu(const Var& x) {
  return unary_op(
      x, [](double v) { return v > 0 ? v : 0.0; },
      [](double v, double, double g) { return v > 0 ? g : 0.0; });
}

Var leaky_relu(const Var& x, double slope) {
  return unary_op(
      x, [slope](double v) { return v > 0 ? v : slope * v; },
      [slope](double v, double, double g) { return v > 0 ? g : slope * g; });
}

Var sigmoid(const Var& x) {
  return unary_op(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y, double g) { return g * y * (1.0 - y); });
}

Var tanh_op(const Var& x) {
  return unary_op(
      x, [](double v) { return std::tanh(v); },
      [](double, double y, double g) { return g * (1.0 - y * y); });
}

Var exp_op(const Var& x) {
  return unary_op(
      x, [](double v) { return std::exp(v); },
      [](double, double y, double g) { return g * y; });
}

Var abs_op(const Var& x) {
  return unary_op(
      x, [](double v) { return std::abs(v); },
      [](double v, double, double g) { return v > 0 ? g : (v < 0 ? -g : 0.0); });
}

Var square(const Var& x) {
  return unary_op(
      x, [](double v) { return v * v; },
      [](double v, double, double g) { return 2.0 * v * g; });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (long i = 0; i < x->value.numel(); ++i) s += x->value[i];
  Var xp = x;
  return make_node(Tensor::scalar(s), {x}, [xp](Node& n) {
    if (!xp->requires_grad) return;
    Tensor& g = xp->ensure_grad();
    for (long i = 0; i < g.numel(); ++i) g[i] += n.grad[0];
  });
}

Var mean(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x->value.numel());
  double s = 0.0;
  for (long i = 0; i < x->value.numel(); ++i) s += x->value[i];
  Var xp = x;
  return make_node(Tensor::scalar(s * inv), {x}, [xp, inv](Node& n) {
    if (!xp->requires_grad) return;
    Tensor& g = xp->ensure_grad();
    for (long i = 0; i < g.numel(); ++i) g[i] += n.grad[0] * inv;
  });
}

Var weighted_sum(const Var& x, Tensor weights) {
  if (!x->value.same_shape(weights))
    throw std::invalid_argument("weighted_sum: shape mismatch");
  double s = 0.0;
  for (long i = 0; i < x->value.numel(); ++i) s += x->value[i] * weights[i];
  Var xp = x;
  auto w = std::make_shared<Tensor>(std::move(weights));
  return make_node(Tensor::scalar(s), {x}, [xp, w](Node& n) {
    if (!xp->requires_grad) return;
    Tensor& g = xp->ensure_grad();
    for (long i = 0; i < g.numel(); ++i) g[i] += n.grad[0] * (*w)[i];
  });
}

Var l2_norm(const Var& x) {
  double s = 0.0;
  for (long i = 0; i < x->value.numel(); ++i) s += x->value[i] * x->value[i];
  const double norm = std::sqrt(s);
  Var xp = x;
  return make_node(Tensor::scalar(norm), {x}, [xp, norm](Node& n) {
    if (!xp->requires_grad || norm == 0.0) return;
    Tensor& g = xp->ensure_grad();
    const double scale = n.grad[0] / norm;
    for (long i = 0; i < g.numel(); ++i) g[i] += scale * xp->value[i];
  });
}

Var l2_norm_rows(const Var& x, long rows) {
  if (rows < 1 || x->value.numel() % rows != 0)
    throw std::invalid_argument("l2_norm_rows: rows must divide numel");
  const long cols = x->value.numel() / rows;
  auto norms = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  double total = 0.0;
  for (long r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* p = x->value.data() + r * cols;
    for (long i = 0; i < cols; ++i) s += p[i] * p[i];
    (*norms)[static_cast<size_t>(r)] = std::sqrt(s);
    total += (*norms)[static_cast<size_t>(r)];
  }
  Var xp = x;
  return make_node(Tensor::scalar(total), {x}, [xp, norms, rows, cols](Node& n) {
    if (!xp->requires_grad) return;
    Tensor& g = xp->ensure_grad();
    for (long r = 0; r < rows; ++r) {
      const double norm = (*norms)[static_cast<size_t>(r)];
      if (norm == 0.0) continue;
      const double scale = n.grad[0] / norm;
      const double* p = xp->value.data() + r * cols;
      double* gp = g.data() + r * cols;
      for (long i = 0; i < cols; ++i) gp[i] += scale * p[i];
    }
  });
}

Var reshape(const Var& x, std::vector<long> shape) {
  Tensor out = x->value.reshaped(std::move(shape));
  Var xp = x;
  return make_node(std::move(out), {x}, [xp](Node& n) {
    if (!xp->requires_grad) return;
    Tensor& g = xp->ensure_grad();
    for (long i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
  const long rows = xs[0]->value.dim(0);
  long total = 0;
  for (const Var& x : xs) {
    if (x->value.ndim() != 2 || x->value.dim(0) != rows)
      throw std::invalid_argument("concat_cols: inputs must be [B,d] with equal B");
    total += x->value.dim(1);
  }
  Tensor out({rows, total});
  long off = 0;
  for (const Var& x : xs) {
    const long d = x->value.dim(1);
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < d; ++c)
        out[r * total + off + c] = x->value[r * d + c];
    off += d;
  }
  auto parents = xs;
  return make_node(std::move(out), xs, [parents, rows, total](Node& n) {
    long off2 = 0;
    for (const Var& x : parents) {
      const long d = x->value.dim(1);
      if (x->requires_grad) {
        Tensor& g = x->ensure_grad();
        for (long r = 0; r < rows; ++r)
          for (long c = 0; c < d; ++c)
            g[r * d + c] += n.grad[r * total + off2 + c];
      }
      off2 += d;
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& va = a->value;
  const Tensor& vb = b->value;
  if (va.ndim() != 4 || vb.ndim() != 4 || va.dim(0) != vb.dim(0) ||
      va.dim(2) != vb.dim(2) || va.dim(3) != vb.dim(3))
    throw std::invalid_argument("concat_channels: incompatible shapes");
  const long B = va.dim(0), Ca = va.dim(1), Cb = vb.dim(1);
  const long HW = va.dim(2) * va.dim(3);
  Tensor out({B, Ca + Cb, va.dim(2), va.dim(3)});
  for (long n = 0; n < B; ++n) {
    std::copy(va.data() + n * Ca * HW, va.data() + (n + 1) * Ca * HW,
              out.data() + n * (Ca + Cb) * HW);
    std::copy(vb.data() + n * Cb * HW, vb.data() + (n + 1) * Cb * HW,
              out.data() + n * (Ca + Cb) * HW + Ca * HW);
  }
  Var ap = a, bp = b;
  return make_node(std::move(out), {a, b}, [ap, bp, B, Ca, Cb, HW](Node& n) {
    if (ap->requires_grad) {
      Tensor& g = ap->ensure_grad();
      for (long i = 0; i < B; ++i)
        for (long j = 0; j < Ca * HW; ++j)
          g[i * Ca * HW + j] += n.grad[i * (Ca + Cb) * HW + j];
    }
    if (bp->requires_grad) {
      Tensor& g = bp->ensure_grad();
      for (long i = 0; i < B; ++i)
        for (long j = 0; j < Cb * HW; ++j)
          g[i * Cb * HW + j] += n.grad[i * (Ca + Cb) * HW + Ca * HW + j];
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& va = a->value;
  const Tensor& vb = b->value;
  if (va.ndim() != 2 || vb.ndim() != 2 || va.dim(1) != vb.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes");
  const long m = va.dim(0), k = va.dim(1), n_ = vb.dim(1);
  Tensor out({m, n_});
  MapMat(out.data(), m, n_) = ConstMapMat(va.data(), m, k) * ConstMapMat(vb.data(), k, n_);
  Var ap = a, bp = b;
  return make_node(std::move(out), {a, b}, [ap, bp, m, k, n_](Node& n) {
    ConstMapMat g(n.grad.data(), m, n_);
    if (ap->requires_grad)
      MapMat(ap->ensure_grad().data(), m, k) += g * ConstMapMat(bp->value.data(), k, n_).transpose();
    if (bp->requires_grad)
      MapMat(bp->ensure_grad().data(), k, n_) += ConstMapMat(ap->value.data(), m, k).transpose() * g;
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Tensor& vx = x->value;
  const Tensor& vw = w->value;
  const Tensor& vb = b->value;
  if (vx.ndim() != 2 || vw.ndim() != 2 || vb.ndim() != 1 ||
      vx.dim(1) != vw.dim(1) || vw.dim(0) != vb.dim(0))
    throw std::invalid_argument("linear: incompatible shapes");
  const long B = vx.dim(0), in = vx.dim(1), out_dim = vw.dim(0);
  Tensor out({B, out_dim});
  MapMat o(out.data(), B, out_dim);
  o = ConstMapMat(vx.data(), B, in) * ConstMapMat(vw.data(), out_dim, in).transpose();
  o.rowwise() += ConstMapVec(vb.data(), out_dim).transpose();
  Var xp = x, wp = w, bp = b;
  return make_node(std::move(out), {x, w, b}, [xp, wp, bp, B, in, out_dim](Node& n) {
    ConstMapMat g(n.grad.data(), B, out_dim);
    if (xp->requires_grad)
      MapMat(xp->ensure_grad().data(), B, in) += g * ConstMapMat(wp->value.data(), out_dim, in);
    if (wp->requires_grad)
      MapMat(wp->ensure_grad().data(), out_dim, in) +=
          g.transpose() * ConstMapMat(xp->value.data(), B, in);
    if (bp->requires_grad)
      MapVec(bp->ensure_grad().data(), out_dim) += g.colwise().sum().transpose();
  });
}

namespace {

struct ConvDims {
  long B, C, H, W, O, kh, kw, OH, OW;
  int stride, pad;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.ndim() != 4 || w.ndim() != 4)
    throw std::invalid_argument("conv2d: expected 4-D input and weight");
  if (x.dim(1) != w.dim(1))
    throw std::invalid_argument("conv2d: channel mismatch");
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride/pad");
  ConvDims d{};
  d.B = x.dim(0); d.C = x.dim(1); d.H = x.dim(2); d.W = x.dim(3);
  d.O = w.dim(0); d.kh = w.dim(2); d.kw = w.dim(3);
  d.stride = stride; d.pad = pad;
  d.OH = (d.H + 2 * pad - d.kh) / stride + 1;
  d.OW = (d.W + 2 * pad - d.kw) / stride + 1;
  if (d.OH < 1 || d.OW < 1) throw std::invalid_argument("conv2d: output collapses");
  return d;
}

// col is [C*kh*kw, OH*OW] for one sample.
void im2col(const double* x, const ConvDims& d, double* col) {
  const long plane = d.H * d.W;
  long row = 0;
  for (long c = 0; c < d.C; ++c)
    for (long ky = 0; ky < d.kh; ++ky)
      for (long kx = 0; kx < d.kw; ++kx, ++row) {
        double* dst = col + row * d.OH * d.OW;
        for (long oy = 0; oy < d.OH; ++oy) {
          const long iy = oy * d.stride - d.pad + ky;
          for (long ox = 0; ox < d.OW; ++ox) {
            const long ix = ox * d.stride - d.pad + kx;
            dst[oy * d.OW + ox] =
                (iy >= 0 && iy < d.H && ix >= 0 && ix < d.W)
                    ? x[c * plane + iy * d.W + ix]
                    : 0.0;
          }
        }
      }
}

void col2im_accum(const double* col, const ConvDims& d, double* gx) {
  const long plane = d.H * d.W;
  long row = 0;
  for (long c = 0; c < d.C; ++c)
    for (long ky = 0; ky < d.kh; ++ky)
      for (long kx = 0; kx < d.kw; ++kx, ++row) {
        const double* src = col + row * d.OH * d.OW;
        for (long oy = 0; oy < d.OH; ++oy) {
          const long iy = oy * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.H) continue;
          for (long ox = 0; ox < d.OW; ++ox) {
            const long ix = ox * d.stride - d.pad + kx;
            if (ix >= 0 && ix < d.W) gx[c * plane + iy * d.W + ix] += src[oy * d.OW + ox];
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const ConvDims d = conv_dims(x->value, w->value, stride, pad);
  if (b->value.ndim() != 1 || b->value.dim(0) != d.O)
    throw std::invalid_argument("conv2d: bias shape mismatch");
  const long krows = d.C * d.kh * d.kw;
  const long opix = d.OH * d.OW;
  Tensor out({d.B, d.O, d.OH, d.OW});
  // Column matrices are kept for the backward pass.
  auto cols = std::make_shared<std::vector<Tensor>>();
  cols->reserve(static_cast<size_t>(d.B));
  ConstMapMat wmat(w->value.data(), d.O, krows);
  for (long n = 0; n < d.B; ++n) {
    Tensor col({krows, opix});
    im2col(x->value.data() + n * d.C * d.H * d.W, d, col.data());
    MapMat o(out.data() + n * d.O * opix, d.O, opix);
    o = wmat * ConstMapMat(col.data(), krows, opix);
    o.colwise() += ConstMapVec(b->value.data(), d.O);
    cols->push_back(std::move(col));
  }
  Var xp = x, wp = w, bp = b;
  return make_node(std::move(out), {x, w, b}, [xp, wp, bp, d, cols, krows, opix](Node& n) {
    ConstMapMat wmat2(wp->value.data(), d.O, krows);
    for (long s = 0; s < d.B; ++s) {
      ConstMapMat g(n.grad.data() + s * d.O * opix, d.O, opix);
      const Tensor& col = (*cols)[static_cast<size_t>(s)];
      if (wp->requires_grad)
        MapMat(wp->ensure_grad().data(), d.O, krows) +=
            g * ConstMapMat(col.data(), krows, opix).transpose();
      if (bp->requires_grad)
        MapVec(bp->ensure_grad().data(), d.O) += g.rowwise().sum();
      if (xp->requires_grad) {
        Tensor gcol({krows, opix});
        MapMat(gcol.data(), krows, opix) = wmat2.transpose() * g;
        col2im_accum(gcol.data(), d, xp->ensure_grad().data() + s * d.C * d.H * d.W);
      }
    }
  });
}

Var upsample_nearest2(const Var& x) {
  const Tensor& v = x->value;
  if (v.ndim() != 4) throw std::invalid_argument("upsample_nearest2: expected 4-D");
  const long B = v.dim(0), C = v.dim(1), H = v.dim(2), W = v.dim(3);
  Tensor out({B, C, 2 * H, 2 * W});
  for (long n = 0; n < B * C; ++n) {
    const double* src = v.data() + n * H * W;
    double* dst = out.data() + n * 4 * H * W;
    for (long y = 0; y < 2 * H; ++y)
      for (long xcol = 0; xcol < 2 * W; ++xcol)
        dst[y * 2 * W + xcol] = src[(y / 2) * W + (xcol / 2)];
  }
  Var xp = x;
  return make_node(std::move(out), {x}, [xp, B, C, H, W](Node& n) {
    if (!xp->requires_grad) return;
    Tensor& g = xp->ensure_grad();
    for (long i = 0; i < B * C; ++i) {
      double* dst = g.data() + i * H * W;
      const double* src = n.grad.data() + i * 4 * H * W;
      for (long y = 0; y < 2 * H; ++y)
        for (long xcol = 0; xcol < 2 * W; ++xcol)
          dst[(y / 2) * W + (xcol / 2)] += src[y * 2 * W + xcol];
    }
  });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& v = x->value;
  if (v.ndim() != 4) throw std::invalid_argument("instance_norm: expected 4-D");
  const long B = v.dim(0), C = v.dim(1), HW = v.dim(2) * v.dim(3);
  if (gamma->value.numel() != C || beta->value.numel() != C)
    throw std::invalid_argument("instance_norm: affine shape mismatch");
  Tensor out(v.shape());
  auto xhat = std::make_shared<Tensor>(v.shape());
  auto inv_std = std::make_shared<Tensor>(std::vector<long>{B, C});
  for (long n = 0; n < B; ++n)
    for (long c = 0; c < C; ++c) {
      const double* src = v.data() + (n * C + c) * HW;
      double mu = 0.0;
      for (long i = 0; i < HW; ++i) mu += src[i];
      mu /= static_cast<double>(HW);
      double var = 0.0;
      for (long i = 0; i < HW; ++i) var += (src[i] - mu) * (src[i] - mu);
      var /= static_cast<double>(HW);
      const double istd = 1.0 / std::sqrt(var + eps);
      (*inv_std)[n * C + c] = istd;
      double* xh = xhat->data() + (n * C + c) * HW;
      double* dst = out.data() + (n * C + c) * HW;
      const double g = gamma->value[c], bta = beta->value[c];
      for (long i = 0; i < HW; ++i) {
        xh[i] = (src[i] - mu) * istd;
        dst[i] = g * xh[i] + bta;
      }
    }
  Var xp = x, gp = gamma, bp = beta;
  return make_node(std::move(out), {x, gamma, beta},
                   [xp, gp, bp, xhat, inv_std, B, C, HW](Node& n) {
    for (long s = 0; s < B; ++s)
      for (long c = 0; c < C; ++c) {
        const double* gy = n.grad.data() + (s * C + c) * HW;
        const double* xh = xhat->data() + (s * C + c) * HW;
        if (gp->requires_grad || bp->requires_grad) {
          double dg = 0.0, db = 0.0;
          for (long i = 0; i < HW; ++i) {
            dg += gy[i] * xh[i];
            db += gy[i];
          }
          if (gp->requires_grad) gp->ensure_grad()[c] += dg;
          if (bp->requires_grad) bp->ensure_grad()[c] += db;
        }
        if (xp->requires_grad) {
          const double gm = gp->value[c];
          double m1 = 0.0, m2 = 0.0;  // mean(gy), mean(gy*xhat)
          for (long i = 0; i < HW; ++i) {
            m1 += gy[i];
            m2 += gy[i] * xh[i];
          }
          m1 /= static_cast<double>(HW);
          m2 /= static_cast<double>(HW);
          double* gx = xp->ensure_grad().data() + (s * C + c) * HW;
          const double istd = (*inv_std)[s * C + c];
          for (long i = 0; i < HW; ++i)
            gx[i] += gm * istd * (gy[i] - m1 - xh[i] * m2);
        }
      }
  });
}

Var pairwise_sqdist(const Var& a, const Var& b) {
  const Tensor& va = a->value;
  const Tensor& vb = b->value;
  if (va.ndim() != 2 || vb.ndim() != 2 || va.dim(1) != vb.dim(1))
    throw std::invalid_argument("pairwise_sqdist: incompatible shapes");
  const long N = va.dim(0), M = vb.dim(0), D = va.dim(1);
  Tensor out({N, M});
  for (long i = 0; i < N; ++i)
    for (long j = 0; j < M; ++j) {
      double s = 0.0;
      const double* pa = va.data() + i * D;
      const double* pb = vb.data() + j * D;
      for (long k = 0; k < D; ++k) {
        const double diff = pa[k] - pb[k];
        s += diff * diff;
      }
      out[i * M + j] = s;
    }
  Var ap = a, bp = b;
  return make_node(std::move(out), {a, b}, [ap, bp, N, M, D](Node& n) {
    for (long i = 0; i < N; ++i)
      for (long j = 0; j < M; ++j) {
        const double g2 = 2.0 * n.grad[i * M + j];
        if (g2 == 0.0) continue;
        const double* pa = ap->value.data() + i * D;
        const double* pb = bp->value.data() + j * D;
        if (ap->requires_grad) {
          double* ga = ap->ensure_grad().data() + i * D;
          for (long k = 0; k < D; ++k) ga[k] += g2 * (pa[k] - pb[k]);
        }
        if (bp->requires_grad) {
          double* gb = bp->ensure_grad().data() + j * D;
          for (long k = 0; k < D; ++k) gb[k] -= g2 * (pa[k] - pb[k]);
        }
      }
  });
}

double gradcheck_max_rel_error(const std::function<Var()>& make_loss,
                               const std::vector<Var>& params, double eps) {
  zero_grad(params);
  Var loss = make_loss();
  backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Var& p : params) analytic.push_back(p->ensure_grad());

  double max_err = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& v = params[pi]->value;
    for (long i = 0; i < v.numel(); ++i) {
      const double orig = v[i];
      v[i] = orig + eps;
      const double fp = make_loss()->value.item();
      v[i] = orig - eps;
      const double fm = make_loss()->value.item();
      v[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double denom = std::max(std::abs(a) + std::abs(numeric), 1e-6);
      max_err = std::max(max_err, std::abs(a - numeric) / denom);
    }
  }
  zero_grad(params);
  return max_err;
}

}  // namespace tfg::nn
