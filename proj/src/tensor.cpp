#include "deskdoc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>

namespace deskdoc {

namespace {

std::int64_t product(const std::vector<int>& shape) {
  std::int64_t p = 1;
  for (int d : shape) p *= d;
  return p;
}

template <typename S>
std::shared_ptr<TensorNode<S>> make_node(std::vector<int> shape, bool requires_grad) {
  auto n = std::make_shared<TensorNode<S>>();
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  n->shape = std::move(shape);
  n->values.assign(static_cast<std::size_t>(product(n->shape)), S(0));
  n->requires_grad = requires_grad;
  return n;
}

template <typename S>
void require_2d(const Tensor<S>& t, const char* op) {
  if (t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-d tensor, got " + shape_to_string(t.shape()));
  }
}

// Result node wired to its inputs; backward_fn is attached only when some
// input needs gradients, so inference passes carry no graph.
template <typename S>
Tensor<S> make_op(std::vector<int> shape,
                  std::vector<std::shared_ptr<TensorNode<S>>> parents,
                  std::function<void(TensorNode<S>&)> backward_fn) {
  bool needs = false;
  for (const auto& p : parents)
    if (p->requires_grad) needs = true;
  auto n = make_node<S>(std::move(shape), needs);
  if (needs) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor<S>::wrap(std::move(n));
}

}  // namespace

std::string shape_to_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

template <typename S>
Tensor<S> Tensor<S>::zeros(std::vector<int> shape, bool requires_grad) {
  return Tensor(make_node<S>(std::move(shape), requires_grad));
}

template <typename S>
Tensor<S> Tensor<S>::from_values(std::vector<int> shape, std::vector<S> values, bool requires_grad) {
  auto n = make_node<S>(std::move(shape), requires_grad);
  if (n->values.size() != values.size()) {
    throw ShapeError("from_values: " + std::to_string(values.size()) + " values for shape " +
                     shape_to_string(n->shape));
  }
  n->values = std::move(values);
  return Tensor(std::move(n));
}

template <typename S>
Tensor<S> Tensor<S>::scalar(S value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

template <typename S>
S Tensor<S>::item() const {
  if (numel() != 1) throw ShapeError("item: tensor has " + std::to_string(numel()) + " elements");
  return node_->values[0];
}

// ---- ops --------------------------------------------------------------

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  auto out = make_op<S>({m, n}, {a.node(), b.node()}, [m, k, n](TensorNode<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const S* g = self.grad.data();
    if (pa.requires_grad) {  // dA += G * B^T
      pa.ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          S gij = g[i * n + j];
          if (gij == S(0)) continue;
          S* arow = pa.grad.data() + static_cast<std::size_t>(i) * k;
          for (int p = 0; p < k; ++p) arow[p] += gij * pb.values[static_cast<std::size_t>(p) * n + j];
        }
    }
    if (pb.requires_grad) {  // dB += A^T * G
      pb.ensure_grad();
      for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i) {
          S aip = pa.values[static_cast<std::size_t>(i) * k + p];
          if (aip == S(0)) continue;
          const S* grow = g + static_cast<std::size_t>(i) * n;
          S* brow = pb.grad.data() + static_cast<std::size_t>(p) * n;
          for (int j = 0; j < n; ++j) brow[j] += aip * grow[j];
        }
    }
  });
  // i-k-j loop: contiguous streams over b and out rows.
  const S* av = a.values().data();
  const S* bv = b.values().data();
  S* ov = out.mutable_values().data();
  for (int i = 0; i < m; ++i) {
    S* orow = ov + static_cast<std::size_t>(i) * n;
    const S* arow = av + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      S aip = arow[p];
      if (aip == S(0)) continue;
      const S* brow = bv + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  require_2d(a, "transpose");
  const int m = a.dim(0), n = a.dim(1);
  auto out = make_op<S>({n, m}, {a.node()}, [m, n](TensorNode<S>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        pa.grad[static_cast<std::size_t>(j) * n + i] += self.grad[static_cast<std::size_t>(i) * m + j];
  });
  const S* av = a.values().data();
  S* ov = out.mutable_values().data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) ov[static_cast<std::size_t>(j) * m + i] = av[static_cast<std::size_t>(i) * n + j];
  return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  auto out = make_op<S>(a.shape(), {a.node(), b.node()}, [](TensorNode<S>& self) {
    for (int side = 0; side < 2; ++side) {
      auto& p = *self.parents[side];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
  const S* av = a.values().data();
  const S* bv = b.values().data();
  S* ov = out.mutable_values().data();
  for (std::size_t i = 0; i < a.values().size(); ++i) ov[i] = av[i] + bv[i];
  return out;
}

template <typename S>
Tensor<S> add_row(const Tensor<S>& mat, const Tensor<S>& row) {
  require_2d(mat, "add_row");
  const int m = mat.dim(0), n = mat.dim(1);
  if (row.numel() != n) {
    throw ShapeError("add_row: row " + shape_to_string(row.shape()) + " does not match " +
                     shape_to_string(mat.shape()));
  }
  auto out = make_op<S>({m, n}, {mat.node(), row.node()}, [m, n](TensorNode<S>& self) {
    auto& pm = *self.parents[0];
    auto& pr = *self.parents[1];
    if (pm.requires_grad) {
      pm.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pm.grad[i] += self.grad[i];
    }
    if (pr.requires_grad) {
      pr.ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) pr.grad[j] += self.grad[static_cast<std::size_t>(i) * n + j];
    }
  });
  const S* mv = mat.values().data();
  const S* rv = row.values().data();
  S* ov = out.mutable_values().data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) ov[static_cast<std::size_t>(i) * n + j] = mv[static_cast<std::size_t>(i) * n + j] + rv[j];
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  auto out = make_op<S>(a.shape(), {a.node()}, [c](TensorNode<S>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += c * self.grad[i];
  });
  const S* av = a.values().data();
  S* ov = out.mutable_values().data();
  for (std::size_t i = 0; i < a.values().size(); ++i) ov[i] = c * av[i];
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  auto out = make_op<S>(a.shape(), {a.node(), b.node()}, [](TensorNode<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += pb.values[i] * self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += pa.values[i] * self.grad[i];
    }
  });
  const S* av = a.values().data();
  const S* bv = b.values().data();
  S* ov = out.mutable_values().data();
  for (std::size_t i = 0; i < a.values().size(); ++i) ov[i] = av[i] * bv[i];
  return out;
}

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  auto out = make_op<S>({1}, {a.node()}, [](TensorNode<S>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    S g = self.grad[0];
    for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
  });
  double acc = 0.0;
  for (S v : a.values()) acc += static_cast<double>(v);
  out.mutable_values()[0] = static_cast<S>(acc);
  return out;
}

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
  auto out = make_op<S>(a.shape(), {a.node()}, [](TensorNode<S>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (pa.values[i] > S(0)) pa.grad[i] += self.grad[i];
  });
  const S* av = a.values().data();
  S* ov = out.mutable_values().data();
  for (std::size_t i = 0; i < a.values().size(); ++i) ov[i] = av[i] > S(0) ? av[i] : S(0);
  return out;
}

namespace {

// Shared softmax gradient: dX = y * (dY - sum(dY * y)) per slice.
template <typename S>
void softmax_backward_slice(const S* y, const S* gy, S* gx, int len, int stride) {
  double dot = 0.0;
  for (int i = 0; i < len; ++i) dot += static_cast<double>(gy[i * stride]) * static_cast<double>(y[i * stride]);
  for (int i = 0; i < len; ++i) {
    gx[i * stride] += static_cast<S>(static_cast<double>(y[i * stride]) *
                                     (static_cast<double>(gy[i * stride]) - dot));
  }
}

}  // namespace

template <typename S>
Tensor<S> softmax(const Tensor<S>& a, int axis) {
  const int nd = a.ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) {
    throw ShapeError("softmax: axis out of range for " + shape_to_string(a.shape()));
  }
  const int len = a.dim(axis);
  std::int64_t inner = 1, outer = 1;
  for (int i = axis + 1; i < nd; ++i) inner *= a.dim(i);
  for (int i = 0; i < axis; ++i) outer *= a.dim(i);

  auto out = make_op<S>(a.shape(), {a.node()}, [len, inner, outer](TensorNode<S>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t in = 0; in < inner; ++in) {
        std::size_t base = static_cast<std::size_t>(o) * len * inner + in;
        softmax_backward_slice(self.values.data() + base, self.grad.data() + base,
                               pa.grad.data() + base, len, static_cast<int>(inner));
      }
  });
  const S* av = a.values().data();
  S* ov = out.mutable_values().data();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t in = 0; in < inner; ++in) {
      std::size_t base = static_cast<std::size_t>(o) * len * inner + in;
      double mx = -HUGE_VAL;
      for (int i = 0; i < len; ++i) mx = std::max(mx, static_cast<double>(av[base + i * inner]));
      double denom = 0.0;
      for (int i = 0; i < len; ++i) denom += std::exp(static_cast<double>(av[base + i * inner]) - mx);
      for (int i = 0; i < len; ++i)
        ov[base + i * inner] = static_cast<S>(std::exp(static_cast<double>(av[base + i * inner]) - mx) / denom);
    }
  return out;
}

template <typename S>
Tensor<S> masked_softmax_rows(const Tensor<S>& a, const std::vector<std::uint8_t>& mask) {
  require_2d(a, "masked_softmax_rows");
  const int q = a.dim(0), k = a.dim(1);
  if (mask.size() != static_cast<std::size_t>(q) * k) {
    throw ShapeError("masked_softmax_rows: mask size does not match " + shape_to_string(a.shape()));
  }
  auto out = make_op<S>({q, k}, {a.node()}, [q, k](TensorNode<S>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int i = 0; i < q; ++i) {
      std::size_t base = static_cast<std::size_t>(i) * k;
      softmax_backward_slice(self.values.data() + base, self.grad.data() + base,
                             pa.grad.data() + base, k, 1);
    }
  });
  const S* av = a.values().data();
  S* ov = out.mutable_values().data();
  for (int i = 0; i < q; ++i) {
    std::size_t base = static_cast<std::size_t>(i) * k;
    double mx = -HUGE_VAL;
    int valid = 0;
    for (int j = 0; j < k; ++j)
      if (mask[base + j]) {
        mx = std::max(mx, static_cast<double>(av[base + j]));
        ++valid;
      }
    if (valid == 0) continue;  // row stays exactly zero
    double denom = 0.0;
    for (int j = 0; j < k; ++j)
      if (mask[base + j]) denom += std::exp(static_cast<double>(av[base + j]) - mx);
    for (int j = 0; j < k; ++j)
      ov[base + j] = mask[base + j]
                         ? static_cast<S>(std::exp(static_cast<double>(av[base + j]) - mx) / denom)
                         : S(0);
  }
  return out;
}

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias, S eps) {
  const int nd = x.ndim();
  const int d = x.dim(nd - 1);
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm: gain/bias must match last dim " + std::to_string(d) + ", got " +
                     shape_to_string(gain.shape()) + " and " + shape_to_string(bias.shape()));
  }
  const std::int64_t rows = x.numel() / d;

  auto out = make_op<S>(x.shape(), {x.node(), gain.node(), bias.node()},
                        [rows, d, eps](TensorNode<S>& self) {
    auto& px = *self.parents[0];
    auto& pg = *self.parents[1];
    auto& pb = *self.parents[2];
    if (px.requires_grad) px.ensure_grad();
    if (pg.requires_grad) pg.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    for (std::int64_t r = 0; r < rows; ++r) {
      const S* xv = px.values.data() + r * d;
      const S* gy = self.grad.data() + r * d;
      double mean = 0.0;
      for (int i = 0; i < d; ++i) mean += xv[i];
      mean /= d;
      double var = 0.0;
      for (int i = 0; i < d; ++i) var += (xv[i] - mean) * (xv[i] - mean);
      var /= d;
      double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
      if (pg.requires_grad || pb.requires_grad) {
        for (int i = 0; i < d; ++i) {
          double xhat = (xv[i] - mean) * inv;
          if (pg.requires_grad) pg.grad[i] += static_cast<S>(gy[i] * xhat);
          if (pb.requires_grad) pb.grad[i] += gy[i];
        }
      }
      if (px.requires_grad) {
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int i = 0; i < d; ++i) {
          double dxhat = static_cast<double>(gy[i]) * static_cast<double>(pg.values[i]);
          double xhat = (xv[i] - mean) * inv;
          mean_dxhat += dxhat;
          mean_dxhat_xhat += dxhat * xhat;
        }
        mean_dxhat /= d;
        mean_dxhat_xhat /= d;
        for (int i = 0; i < d; ++i) {
          double dxhat = static_cast<double>(gy[i]) * static_cast<double>(pg.values[i]);
          double xhat = (xv[i] - mean) * inv;
          px.grad[r * d + i] += static_cast<S>(inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat));
        }
      }
    }
  });
  const S* xv = x.values().data();
  const S* gv = gain.values().data();
  const S* bv = bias.values().data();
  S* ov = out.mutable_values().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const S* xr = xv + r * d;
    double mean = 0.0;
    for (int i = 0; i < d; ++i) mean += xr[i];
    mean /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= d;  // population variance
    double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    for (int i = 0; i < d; ++i)
      ov[r * d + i] = static_cast<S>((xr[i] - mean) * inv * gv[i] + bv[i]);
  }
  return out;
}

template <typename S>
Tensor<S> conv2x2(const Tensor<S>& image, const Tensor<S>& kernel, const Tensor<S>& bias) {
  if (image.ndim() != 3) throw ShapeError("conv2x2: image must be [c,h,w], got " + shape_to_string(image.shape()));
  if (kernel.ndim() != 4 || kernel.dim(2) != 2 || kernel.dim(3) != 2) {
    throw ShapeError("conv2x2: kernel must be [d,c,2,2], got " + shape_to_string(kernel.shape()));
  }
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const int d = kernel.dim(0);
  if (kernel.dim(1) != c) {
    throw ShapeError("conv2x2: kernel channels " + std::to_string(kernel.dim(1)) +
                     " do not match image channels " + std::to_string(c));
  }
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("conv2x2: image dimensions must be even (resize required), got " +
                     shape_to_string(image.shape()));
  }
  if (bias.numel() != d) throw ShapeError("conv2x2: bias must have " + std::to_string(d) + " entries");
  const int oh = h / 2, ow = w / 2;

  auto out = make_op<S>({d, oh, ow}, {image.node(), kernel.node(), bias.node()},
                        [c, h, w, d, oh, ow](TensorNode<S>& self) {
    auto& pi = *self.parents[0];
    auto& pk = *self.parents[1];
    auto& pb = *self.parents[2];
    if (pi.requires_grad) pi.ensure_grad();
    if (pk.requires_grad) pk.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    for (int od = 0; od < d; ++od)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          S g = self.grad[(static_cast<std::size_t>(od) * oh + i) * ow + j];
          if (pb.requires_grad) pb.grad[od] += g;
          for (int ic = 0; ic < c; ++ic)
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b) {
                std::size_t img_idx = (static_cast<std::size_t>(ic) * h + (2 * i + a)) * w + (2 * j + b);
                std::size_t ker_idx = ((static_cast<std::size_t>(od) * c + ic) * 2 + a) * 2 + b;
                if (pk.requires_grad) pk.grad[ker_idx] += g * pi.values[img_idx];
                if (pi.requires_grad) pi.grad[img_idx] += g * pk.values[ker_idx];
              }
        }
  });
  const S* iv = image.values().data();
  const S* kv = kernel.values().data();
  const S* bv = bias.values().data();
  S* ov = out.mutable_values().data();
  for (int od = 0; od < d; ++od)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        double acc = static_cast<double>(bv[od]);
        for (int ic = 0; ic < c; ++ic)
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              acc += static_cast<double>(iv[(static_cast<std::size_t>(ic) * h + (2 * i + a)) * w + (2 * j + b)]) *
                     static_cast<double>(kv[((static_cast<std::size_t>(od) * c + ic) * 2 + a) * 2 + b]);
        ov[(static_cast<std::size_t>(od) * oh + i) * ow + j] = static_cast<S>(acc);
      }
  return out;
}

template <typename S>
Tensor<S> channels_to_rows(const Tensor<S>& x) {
  if (x.ndim() != 3) throw ShapeError("channels_to_rows: expected [c,h,w], got " + shape_to_string(x.shape()));
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto out = make_op<S>({h * w, c}, {x.node()}, [c, h, w](TensorNode<S>& self) {
    auto& px = *self.parents[0];
    px.ensure_grad();
    for (int ic = 0; ic < c; ++ic)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          px.grad[(static_cast<std::size_t>(ic) * h + i) * w + j] +=
              self.grad[static_cast<std::size_t>(i * w + j) * c + ic];
  });
  const S* xv = x.values().data();
  S* ov = out.mutable_values().data();
  for (int ic = 0; ic < c; ++ic)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        ov[static_cast<std::size_t>(i * w + j) * c + ic] = xv[(static_cast<std::size_t>(ic) * h + i) * w + j];
  return out;
}

namespace {

template <typename S>
Tensor<S> lookup_impl(const Tensor<S>& table, const std::vector<int>& ids, bool allow_null,
                      const char* op) {
  require_2d(table, op);
  const int v = table.dim(0), d = table.dim(1);
  const int limit = allow_null ? v + 1 : v;  // id == v selects the zero row
  for (int id : ids) {
    if (id < 0 || id >= limit) {
      throw ShapeError(std::string(op) + ": id " + std::to_string(id) + " out of range for " +
                       std::to_string(v) + " rows");
    }
  }
  const int n = static_cast<int>(ids.size());
  auto out = make_op<S>({n, d}, {table.node()}, [ids, v, d, n](TensorNode<S>& self) {
    auto& pt = *self.parents[0];
    pt.ensure_grad();
    for (int i = 0; i < n; ++i) {
      if (ids[i] == v) continue;
      S* trow = pt.grad.data() + static_cast<std::size_t>(ids[i]) * d;
      const S* grow = self.grad.data() + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) trow[j] += grow[j];
    }
  });
  const S* tv = table.values().data();
  S* ov = out.mutable_values().data();
  for (int i = 0; i < n; ++i) {
    if (ids[i] == v) continue;  // zeros
    const S* trow = tv + static_cast<std::size_t>(ids[i]) * d;
    std::copy(trow, trow + d, ov + static_cast<std::size_t>(i) * d);
  }
  return out;
}

}  // namespace

template <typename S>
Tensor<S> embedding_lookup(const Tensor<S>& table, const std::vector<int>& ids) {
  if (ids.empty()) throw ShapeError("embedding_lookup: ids must be non-empty");
  return lookup_impl(table, ids, false, "embedding_lookup");
}

template <typename S>
Tensor<S> embedding_lookup_or_zero(const Tensor<S>& table, const std::vector<int>& ids) {
  if (ids.empty()) throw ShapeError("embedding_lookup_or_zero: ids must be non-empty");
  return lookup_impl(table, ids, true, "embedding_lookup_or_zero");
}

template <typename S>
Tensor<S> gather_rows(const Tensor<S>& x, const std::vector<int>& idx) {
  if (idx.empty()) throw ShapeError("gather_rows: idx must be non-empty");
  return lookup_impl(x, idx, false, "gather_rows");
}

template <typename S>
Tensor<S> slice_rows(const Tensor<S>& x, int start, int count) {
  require_2d(x, "slice_rows");
  const int m = x.dim(0), n = x.dim(1);
  if (start < 0 || count < 1 || start + count > m) {
    throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " + std::to_string(m) + " rows");
  }
  auto out = make_op<S>({count, n}, {x.node()}, [start, count, n](TensorNode<S>& self) {
    auto& px = *self.parents[0];
    px.ensure_grad();
    for (int i = 0; i < count; ++i)
      for (int j = 0; j < n; ++j)
        px.grad[static_cast<std::size_t>(start + i) * n + j] += self.grad[static_cast<std::size_t>(i) * n + j];
  });
  const S* xv = x.values().data();
  std::copy(xv + static_cast<std::size_t>(start) * n, xv + static_cast<std::size_t>(start + count) * n,
            out.mutable_values().data());
  return out;
}

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& x, int start, int count) {
  require_2d(x, "slice_cols");
  const int m = x.dim(0), n = x.dim(1);
  if (start < 0 || count < 1 || start + count > n) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " + std::to_string(n) + " cols");
  }
  auto out = make_op<S>({m, count}, {x.node()}, [start, count, m, n](TensorNode<S>& self) {
    auto& px = *self.parents[0];
    px.ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < count; ++j)
        px.grad[static_cast<std::size_t>(i) * n + start + j] += self.grad[static_cast<std::size_t>(i) * count + j];
  });
  const S* xv = x.values().data();
  S* ov = out.mutable_values().data();
  for (int i = 0; i < m; ++i)
    std::copy(xv + static_cast<std::size_t>(i) * n + start, xv + static_cast<std::size_t>(i) * n + start + count,
              ov + static_cast<std::size_t>(i) * count);
  return out;
}

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  const int n = parts[0].dim(1);
  int m = 0;
  std::vector<std::shared_ptr<TensorNode<S>>> nodes;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    require_2d(p, "concat_rows");
    if (p.dim(1) != n) {
      throw ShapeError("concat_rows: column mismatch " + shape_to_string(p.shape()) + " vs " +
                       std::to_string(n) + " cols");
    }
    offsets.push_back(m);
    m += p.dim(0);
    nodes.push_back(p.node());
  }
  auto out = make_op<S>({m, n}, nodes, [offsets, n](TensorNode<S>& self) {
    for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
      auto& p = *self.parents[pi];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      int rows = p.shape[0];
      const S* g = self.grad.data() + static_cast<std::size_t>(offsets[pi]) * n;
      for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * n; ++i) p.grad[i] += g[i];
    }
  });
  S* ov = out.mutable_values().data();
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& vals = parts[pi].values();
    std::copy(vals.begin(), vals.end(), ov + static_cast<std::size_t>(offsets[pi]) * n);
  }
  return out;
}

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const int m = parts[0].dim(0);
  int n = 0;
  std::vector<std::shared_ptr<TensorNode<S>>> nodes;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.dim(0) != m) {
      throw ShapeError("concat_cols: row mismatch " + shape_to_string(p.shape()) + " vs " +
                       std::to_string(m) + " rows");
    }
    offsets.push_back(n);
    n += p.dim(1);
    nodes.push_back(p.node());
  }
  auto out = make_op<S>({m, n}, nodes, [offsets, m, n](TensorNode<S>& self) {
    for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
      auto& p = *self.parents[pi];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      int cols = p.shape[1];
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < cols; ++j)
          p.grad[static_cast<std::size_t>(i) * cols + j] +=
              self.grad[static_cast<std::size_t>(i) * n + offsets[pi] + j];
    }
  });
  S* ov = out.mutable_values().data();
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& vals = parts[pi].values();
    int cols = parts[pi].dim(1);
    for (int i = 0; i < m; ++i)
      std::copy(vals.begin() + static_cast<std::size_t>(i) * cols,
                vals.begin() + static_cast<std::size_t>(i + 1) * cols,
                ov + static_cast<std::size_t>(i) * n + offsets[pi]);
  }
  return out;
}

template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets, int ignore_index) {
  require_2d(logits, "cross_entropy");
  const int n = logits.dim(0), c = logits.dim(1);
  if (targets.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(n) + " rows");
  }
  int n_valid = 0;
  for (int t : targets) {
    if (t == ignore_index) continue;
    if (t < 0 || t >= c) {
      throw ShapeError("cross_entropy: target " + std::to_string(t) + " out of range [0, " +
                       std::to_string(c) + ")");
    }
    ++n_valid;
  }

  auto out = make_op<S>({1}, {logits.node()},
                        [targets, ignore_index, n, c, n_valid](TensorNode<S>& self) {
    if (n_valid == 0) return;
    auto& pl = *self.parents[0];
    pl.ensure_grad();
    const double g = static_cast<double>(self.grad[0]) / n_valid;
    for (int i = 0; i < n; ++i) {
      if (targets[i] == ignore_index) continue;
      const S* row = pl.values.data() + static_cast<std::size_t>(i) * c;
      double mx = -HUGE_VAL;
      for (int j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
      double denom = 0.0;
      for (int j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
      for (int j = 0; j < c; ++j) {
        double p = std::exp(static_cast<double>(row[j]) - mx) / denom;
        double delta = (j == targets[i]) ? 1.0 : 0.0;
        pl.grad[static_cast<std::size_t>(i) * c + j] += static_cast<S>(g * (p - delta));
      }
    }
  });
  double loss = 0.0;
  const S* lv = logits.values().data();
  for (int i = 0; i < n; ++i) {
    if (targets[i] == ignore_index) continue;
    const S* row = lv + static_cast<std::size_t>(i) * c;
    double mx = -HUGE_VAL;
    for (int j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double denom = 0.0;
    for (int j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
    loss += std::log(denom) - (static_cast<double>(row[targets[i]]) - mx);
  }
  out.mutable_values()[0] = n_valid > 0 ? static_cast<S>(loss / n_valid) : S(0);
  return out;
}

template <typename S>
void backward(const Tensor<S>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a defined scalar tensor");
  }
  auto root = loss.node();
  if (!root->requires_grad) return;

  // Post-order DFS for a reverse topological sweep.
  std::vector<TensorNode<S>*> order;
  std::unordered_set<TensorNode<S>*> seen;
  std::vector<std::pair<TensorNode<S>*, std::size_t>> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, child] = stack.back();
    if (child < node->parents.size()) {
      TensorNode<S>* next = node->parents[child].get();
      ++child;
      if (next->requires_grad && !seen.count(next)) {
        seen.insert(next);
        stack.push_back({next, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<S>* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
  // Release the graph; leaves keep their gradients.
  for (TensorNode<S>* node : order) {
    if (node->backward_fn) {
      node->backward_fn = nullptr;
      node->parents.clear();
      node->grad.clear();
    }
  }
}

// ---- AdamW -----------------------------------------------------------------

template <typename S>
bool AdamW<S>::step(std::vector<Tensor<S>>& params) {
  if (slots_.empty()) {
    slots_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      slots_[i].m.assign(params[i].numel(), S(0));
      slots_[i].v.assign(params[i].numel(), S(0));
    }
  }
  if (slots_.size() != params.size()) throw ShapeError("AdamW: parameter list changed size");

  double norm_sq = 0.0;
  bool finite = true;
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (S g : p.grad()) {
      if (!std::isfinite(static_cast<double>(g))) finite = false;
      norm_sq += static_cast<double>(g) * static_cast<double>(g);
    }
  }
  if (!finite || !std::isfinite(norm_sq)) return false;

  double clip_scale = 1.0;
  if (options_.clip_norm > S(0)) {
    double norm = std::sqrt(norm_sq);
    if (norm > static_cast<double>(options_.clip_norm)) {
      clip_scale = static_cast<double>(options_.clip_norm) / norm;
    }
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(options_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(options_.beta2), static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.has_grad()) continue;
    if (slots_[i].m.size() != p.grad().size()) throw ShapeError("AdamW: moment/parameter shape mismatch");
    auto& vals = p.mutable_values();
    const auto& grads = p.grad();
    auto& m = slots_[i].m;
    auto& v = slots_[i].v;
    for (std::size_t j = 0; j < vals.size(); ++j) {
      double g = static_cast<double>(grads[j]) * clip_scale;
      double mj = static_cast<double>(options_.beta1) * m[j] + (1.0 - static_cast<double>(options_.beta1)) * g;
      double vj = static_cast<double>(options_.beta2) * v[j] + (1.0 - static_cast<double>(options_.beta2)) * g * g;
      m[j] = static_cast<S>(mj);
      v[j] = static_cast<S>(vj);
      double mhat = mj / bc1;
      double vhat = vj / bc2;
      double update = static_cast<double>(options_.lr) * mhat / (std::sqrt(vhat) + static_cast<double>(options_.eps));
      double decay = static_cast<double>(options_.lr) * static_cast<double>(options_.weight_decay) *
                     static_cast<double>(vals[j]);
      vals[j] = static_cast<S>(static_cast<double>(vals[j]) - update - decay);
    }
  }
  return true;
}

// ---- explicit instantiations -------------------------------------------

#define DESKDOC_INSTANTIATE(S)                                                               \
  template class Tensor<S>;                                                                  \
  template class AdamW<S>;                                                                   \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> transpose(const Tensor<S>&);                                            \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> add_row(const Tensor<S>&, const Tensor<S>&);                            \
  template Tensor<S> scale(const Tensor<S>&, S);                                             \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> sum(const Tensor<S>&);                                                  \
  template Tensor<S> relu(const Tensor<S>&);                                                 \
  template Tensor<S> softmax(const Tensor<S>&, int);                                         \
  template Tensor<S> masked_softmax_rows(const Tensor<S>&, const std::vector<std::uint8_t>&); \
  template Tensor<S> layer_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S);    \
  template Tensor<S> conv2x2(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);          \
  template Tensor<S> channels_to_rows(const Tensor<S>&);                                     \
  template Tensor<S> embedding_lookup(const Tensor<S>&, const std::vector<int>&);            \
  template Tensor<S> embedding_lookup_or_zero(const Tensor<S>&, const std::vector<int>&);    \
  template Tensor<S> gather_rows(const Tensor<S>&, const std::vector<int>&);                 \
  template Tensor<S> slice_rows(const Tensor<S>&, int, int);                                 \
  template Tensor<S> slice_cols(const Tensor<S>&, int, int);                                 \
  template Tensor<S> concat_rows(const std::vector<Tensor<S>>&);                             \
  template Tensor<S> concat_cols(const std::vector<Tensor<S>>&);                             \
  template Tensor<S> cross_entropy(const Tensor<S>&, const std::vector<int>&, int);          \
  template void backward(const Tensor<S>&);

DESKDOC_INSTANTIATE(float)
DESKDOC_INSTANTIATE(double)

#undef DESKDOC_INSTANTIATE

}  // namespace deskdoc
