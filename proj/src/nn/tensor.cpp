#include "n2r/nn/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace n2r::nn {

namespace {
thread_local bool g_no_grad = false;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

// Builds a result node, attaching history only when some parent needs
// gradients and recording is enabled.
template <typename T>
Tensor<T> make_result(Shape shape,
                      std::vector<T> value,
                      std::vector<NodePtr<T>> parents,
                      std::function<void(Node<T> &)> backward_fn)
{
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool needs = false;
  if (!g_no_grad) {
    for (auto const &p : parents) {
      needs = needs || p->requires_grad;
    }
  }
  if (needs) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(backward_fn);
  }
  return Tensor<T>::from_node(std::move(n));
}

void require(bool cond, std::string const &msg)
{
  if (!cond) { throw DimensionError(msg); }
}

template <typename T>
void require_chw(Tensor<T> const &x, char const *op)
{
  require(x.defined() && x.shape().size() == 3, std::string(op) + ": expected a [C, H, W] tensor, got " +
                                                    (x.defined() ? to_string(x.shape()) : std::string("undefined")));
}

} // namespace

std::string to_string(Shape const &s)
{
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += (i ? ", " : "") + std::to_string(s[i]);
  }
  return out + "]";
}

NoGrad::NoGrad()
  : prev_{g_no_grad}
{
  g_no_grad = true;
}
NoGrad::~NoGrad() { g_no_grad = prev_; }
bool NoGrad::active() { return g_no_grad; }

// ------------------------------------------------------------------ Tensor

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
  : node_{std::make_shared<Node<T>>()}
{
  if (values.size() != nn::numel(shape)) {
    throw DimensionError("Tensor: " + std::to_string(values.size()) + " values for shape " + to_string(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad)
{
  auto const n = nn::numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, T{0}), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T v, bool requires_grad)
{
  return Tensor(Shape{}, std::vector<T>{v}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const
{
  if (numel() != 1) { throw DimensionError("Tensor::item on a tensor of shape " + to_string(shape())); }
  return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const
{
  return Tensor(node_->shape, node_->value, false);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const
{
  Tensor t(node_->shape, node_->value, node_->requires_grad);
  t.node_->grad = node_->grad;
  return t;
}

template <typename T>
void backward(Tensor<T> const &loss)
{
  if (!loss.defined() || loss.numel() != 1) { throw UsageError("backward: loss must be a scalar tensor"); }
  if (!loss.requires_grad()) { throw UsageError("backward: loss does not depend on any tensor that requires grad"); }

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T> *> order;
  std::unordered_set<Node<T> *> seen;
  std::vector<std::pair<Node<T> *, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto &[n, i] = stack.back();
    if (i < n->parents.size()) {
      Node<T> *p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) { stack.emplace_back(p, 0); }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T> &n = **it;
    if (n.backward && !n.grad.empty()) { n.backward(n); }
  }
}

// ------------------------------------------------------------------ conv2d

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Patch matrix [Ci*K*K, H*W] for 'same' zero padding.
template <typename T>
void im2col(T const *x, int ci, int h, int w, int ks, Mat<T> &cols)
{
  int const pad = ks / 2;
  cols.setZero(static_cast<Eigen::Index>(ci) * ks * ks, static_cast<Eigen::Index>(h) * w);
  for (int i = 0; i < ci; ++i) {
    T const *src = x + static_cast<std::size_t>(i) * h * w;
    for (int ky = 0; ky < ks; ++ky) {
      int const dy = ky - pad;
      int const y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
      for (int kx = 0; kx < ks; ++kx) {
        int const dx = kx - pad;
        int const x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        T *row = cols.row((static_cast<Eigen::Index>(i) * ks + ky) * ks + kx).data();
        for (int y = y0; y < y1; ++y) {
          T const *srow = src + static_cast<std::size_t>(y + dy) * w + dx;
          T *drow = row + static_cast<std::size_t>(y) * w;
          for (int xx = x0; xx < x1; ++xx) {
            drow[xx] = srow[xx];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(Mat<T> const &cols, int ci, int h, int w, int ks, T *gx)
{
  int const pad = ks / 2;
  for (int i = 0; i < ci; ++i) {
    T *dst = gx + static_cast<std::size_t>(i) * h * w;
    for (int ky = 0; ky < ks; ++ky) {
      int const dy = ky - pad;
      int const y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
      for (int kx = 0; kx < ks; ++kx) {
        int const dx = kx - pad;
        int const x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        T const *row = cols.row((static_cast<Eigen::Index>(i) * ks + ky) * ks + kx).data();
        for (int y = y0; y < y1; ++y) {
          T *drow = dst + static_cast<std::size_t>(y + dy) * w + dx;
          T const *srow = row + static_cast<std::size_t>(y) * w;
          for (int xx = x0; xx < x1; ++xx) {
            drow[xx] += srow[xx];
          }
        }
      }
    }
  }
}

} // namespace

template <typename T>
Tensor<T> conv2d(Tensor<T> const &x, Tensor<T> const &k, Tensor<T> const &b)
{
  require_chw(x, "conv2d");
  require(k.defined() && k.shape().size() == 4, "conv2d: kernel must be [Co, Ci, K, K]");
  int const ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  int const co = k.dim(0), ks = k.dim(2);
  require(k.dim(1) == ci, "conv2d: kernel expects " + std::to_string(k.dim(1)) + " input channels, got " +
                             std::to_string(ci));
  require(k.dim(3) == ks && ks % 2 == 1, "conv2d: kernel must be square with odd size");
  require(b.defined() && b.numel() == static_cast<std::size_t>(co), "conv2d: bias must have Co entries");
  auto const plane = static_cast<Eigen::Index>(h) * w;
  auto const kdim = static_cast<Eigen::Index>(ci) * ks * ks;

  Mat<T> cols;
  im2col(x.data().data(), ci, h, w, ks, cols);
  Eigen::Map<Mat<T> const> const km(k.data().data(), co, kdim);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1> const> const bm(b.data().data(), co);
  std::vector<T> out(static_cast<std::size_t>(co) * plane);
  Eigen::Map<Mat<T>> om(out.data(), co, plane);
  om.noalias() = km * cols;
  om.colwise() += bm;

  return make_result<T>(
    {co, h, w}, std::move(out), {x.node(), k.node(), b.node()}, [=](Node<T> &self) {
      Eigen::Map<Mat<T> const> const g(self.grad.data(), co, plane);
      auto &xn = *self.parents[0];
      auto &kn = *self.parents[1];
      auto &bn = *self.parents[2];
      if (bn.requires_grad) {
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(bn.grad_buffer().data(), co) += g.rowwise().sum();
      }
      if (kn.requires_grad) {
        Mat<T> xc;
        im2col(xn.value.data(), ci, h, w, ks, xc);
        Eigen::Map<Mat<T>>(kn.grad_buffer().data(), co, kdim).noalias() += g * xc.transpose();
      }
      if (xn.requires_grad) {
        Eigen::Map<Mat<T> const> const kv(kn.value.data(), co, kdim);
        Mat<T> const gc = kv.transpose() * g;
        col2im_add(gc, ci, h, w, ks, xn.grad_buffer().data());
      }
    });
}

// ------------------------------------------------------- conv_transpose2x2

template <typename T>
Tensor<T> conv_transpose2x2(Tensor<T> const &x, Tensor<T> const &k, Tensor<T> const &b)
{
  require_chw(x, "conv_transpose2x2");
  require(k.defined() && k.shape().size() == 4 && k.dim(2) == 2 && k.dim(3) == 2,
          "conv_transpose2x2: kernel must be [Ci, Co, 2, 2]");
  int const ci = x.dim(0), h = x.dim(1), w = x.dim(2), co = k.dim(1);
  require(k.dim(0) == ci, "conv_transpose2x2: channel mismatch");
  require(b.defined() && b.numel() == static_cast<std::size_t>(co), "conv_transpose2x2: bias must have Co entries");
  int const oh = 2 * h, ow = 2 * w;
  std::size_t const iplane = static_cast<std::size_t>(h) * w, oplane = static_cast<std::size_t>(oh) * ow;

  std::vector<T> out(static_cast<std::size_t>(co) * oplane);
  auto const xv = x.data();
  auto const kv = k.data();
  auto const bv = b.data();
  for (int o = 0; o < co; ++o) {
    T *dst = out.data() + o * oplane;
    std::fill(dst, dst + oplane, bv[o]);
    for (int i = 0; i < ci; ++i) {
      T const *src = xv.data() + i * iplane;
      T const *kk = kv.data() + (static_cast<std::size_t>(i) * co + o) * 4;
      for (int y = 0; y < h; ++y) {
        T *r0 = dst + static_cast<std::size_t>(2 * y) * ow;
        T *r1 = r0 + ow;
        T const *s = src + static_cast<std::size_t>(y) * w;
        for (int xx = 0; xx < w; ++xx) {
          T const v = s[xx];
          r0[2 * xx] += kk[0] * v;
          r0[2 * xx + 1] += kk[1] * v;
          r1[2 * xx] += kk[2] * v;
          r1[2 * xx + 1] += kk[3] * v;
        }
      }
    }
  }

  return make_result<T>(
    {co, oh, ow}, std::move(out), {x.node(), k.node(), b.node()}, [=](Node<T> &self) {
      auto const &go = self.grad;
      auto &xn = *self.parents[0];
      auto &kn = *self.parents[1];
      auto &bn = *self.parents[2];
      if (bn.requires_grad) {
        auto &gb = bn.grad_buffer();
        for (int o = 0; o < co; ++o) {
          T s{0};
          T const *g = go.data() + o * oplane;
          for (std::size_t p = 0; p < oplane; ++p) {
            s += g[p];
          }
          gb[o] += s;
        }
      }
      T *gx = xn.requires_grad ? xn.grad_buffer().data() : nullptr;
      T *gk = kn.requires_grad ? kn.grad_buffer().data() : nullptr;
      for (int o = 0; o < co; ++o) {
        T const *g = go.data() + o * oplane;
        for (int i = 0; i < ci; ++i) {
          T const *src = xn.value.data() + i * iplane;
          std::size_t const kidx = (static_cast<std::size_t>(i) * co + o) * 4;
          T const *kk = kn.value.data() + kidx;
          T a0{0}, a1{0}, a2{0}, a3{0};
          for (int y = 0; y < h; ++y) {
            T const *g0 = g + static_cast<std::size_t>(2 * y) * ow;
            T const *g1 = g0 + ow;
            T const *s = src + static_cast<std::size_t>(y) * w;
            T *gxr = gx ? gx + i * iplane + static_cast<std::size_t>(y) * w : nullptr;
            for (int xx = 0; xx < w; ++xx) {
              if (gxr) {
                gxr[xx] += kk[0] * g0[2 * xx] + kk[1] * g0[2 * xx + 1] + kk[2] * g1[2 * xx] + kk[3] * g1[2 * xx + 1];
              }
              a0 += s[xx] * g0[2 * xx];
              a1 += s[xx] * g0[2 * xx + 1];
              a2 += s[xx] * g1[2 * xx];
              a3 += s[xx] * g1[2 * xx + 1];
            }
          }
          if (gk) {
            gk[kidx] += a0;
            gk[kidx + 1] += a1;
            gk[kidx + 2] += a2;
            gk[kidx + 3] += a3;
          }
        }
      }
    });
}

// ----------------------------------------------------------- instance_norm

template <typename T>
Tensor<T> instance_norm(Tensor<T> const &x, Tensor<T> const &gamma, Tensor<T> const &beta, double eps)
{
  require_chw(x, "instance_norm");
  int const c = x.dim(0);
  std::size_t const plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  require(gamma.numel() == static_cast<std::size_t>(c) && beta.numel() == static_cast<std::size_t>(c),
          "instance_norm: affine parameters must have C entries");

  auto const xv = x.data();
  std::vector<T> xhat(xv.size());
  std::vector<T> inv_std(c);
  std::vector<T> out(xv.size());
  for (int ch = 0; ch < c; ++ch) {
    T const *src = xv.data() + ch * plane;
    double mean = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
      mean += src[p];
    }
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
      double const d = src[p] - mean;
      var += d * d;
    }
    var /= static_cast<double>(plane);
    double const inv = 1.0 / std::sqrt(var + eps);
    inv_std[ch] = static_cast<T>(inv);
    T const g = gamma.data()[ch], bt = beta.data()[ch];
    for (std::size_t p = 0; p < plane; ++p) {
      T const xh = static_cast<T>((src[p] - mean) * inv);
      xhat[ch * plane + p] = xh;
      out[ch * plane + p] = g * xh + bt;
    }
  }

  return make_result<T>(x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
                        [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T> &self) {
                          auto const &go = self.grad;
                          auto &xn = *self.parents[0];
                          auto &gn = *self.parents[1];
                          auto &bn = *self.parents[2];
                          for (int ch = 0; ch < c; ++ch) {
                            T const *g = go.data() + ch * plane;
                            T const *xh = xhat.data() + ch * plane;
                            double sg = 0.0, sgx = 0.0;
                            for (std::size_t p = 0; p < plane; ++p) {
                              sg += g[p];
                              sgx += static_cast<double>(g[p]) * xh[p];
                            }
                            if (gn.requires_grad) { gn.grad_buffer()[ch] += static_cast<T>(sgx); }
                            if (bn.requires_grad) { bn.grad_buffer()[ch] += static_cast<T>(sg); }
                            if (xn.requires_grad) {
                              T *gx = xn.grad_buffer().data() + ch * plane;
                              double const n = static_cast<double>(plane);
                              T const a = static_cast<T>(gn.value[ch] * inv_std[ch]);
                              T const mg = static_cast<T>(sg / n), mgx = static_cast<T>(sgx / n);
                              for (std::size_t p = 0; p < plane; ++p) {
                                gx[p] += a * (g[p] - mg - xh[p] * mgx);
                              }
                            }
                          }
                        });
}

// -------------------------------------------------------------- pointwise

template <typename T>
Tensor<T> leaky_relu(Tensor<T> const &x, double slope)
{
  auto const xv = x.data();
  T const s = static_cast<T>(slope);
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = xv[i] >= T{0} ? xv[i] : s * xv[i];
  }
  return make_result<T>(x.shape(), std::move(out), {x.node()}, [s](Node<T> &self) {
    auto &xn = *self.parents[0];
    auto &gx = xn.grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += xn.value[i] >= T{0} ? self.grad[i] : s * self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> avg_pool2(Tensor<T> const &x)
{
  require_chw(x, "avg_pool2");
  int const c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(h % 2 == 0 && w % 2 == 0, "avg_pool2: spatial dimensions must be even, got " + to_string(x.shape()));
  int const oh = h / 2, ow = w / 2;
  auto const xv = x.data();
  std::vector<T> out(static_cast<std::size_t>(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < oh; ++y) {
      T const *r0 = xv.data() + (static_cast<std::size_t>(ch) * h + 2 * y) * w;
      T const *r1 = r0 + w;
      T *dst = out.data() + (static_cast<std::size_t>(ch) * oh + y) * ow;
      for (int xx = 0; xx < ow; ++xx) {
        dst[xx] = T(0.25) * (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]);
      }
    }
  }
  return make_result<T>({c, oh, ow}, std::move(out), {x.node()}, [=](Node<T> &self) {
    auto &gx = self.parents[0]->grad_buffer();
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < oh; ++y) {
        T *r0 = gx.data() + (static_cast<std::size_t>(ch) * h + 2 * y) * w;
        T *r1 = r0 + w;
        T const *g = self.grad.data() + (static_cast<std::size_t>(ch) * oh + y) * ow;
        for (int xx = 0; xx < ow; ++xx) {
          T const q = T(0.25) * g[xx];
          r0[2 * xx] += q;
          r0[2 * xx + 1] += q;
          r1[2 * xx] += q;
          r1[2 * xx + 1] += q;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> concat_channels(Tensor<T> const &a, Tensor<T> const &b)
{
  require_chw(a, "concat_channels");
  require_chw(b, "concat_channels");
  require(a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
          "concat_channels: spatial mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  std::vector<T> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  std::size_t const na = a.numel();
  return make_result<T>({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(out), {a.node(), b.node()},
                        [na](Node<T> &self) {
                          auto &an = *self.parents[0];
                          auto &bn = *self.parents[1];
                          if (an.requires_grad) {
                            auto &g = an.grad_buffer();
                            for (std::size_t i = 0; i < na; ++i) {
                              g[i] += self.grad[i];
                            }
                          }
                          if (bn.requires_grad) {
                            auto &g = bn.grad_buffer();
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              g[i] += self.grad[na + i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> add(Tensor<T> const &a, Tensor<T> const &b)
{
  require(a.shape() == b.shape(), "add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.data()[i] + b.data()[i];
  }
  return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T> &self) {
    for (auto const &p : self.parents) {
      if (!p->requires_grad) { continue; }
      auto &g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> mul(Tensor<T> const &a, Tensor<T> const &b)
{
  require(a.shape() == b.shape(), "mul: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.data()[i] * b.data()[i];
  }
  return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T> &self) {
    auto &an = *self.parents[0];
    auto &bn = *self.parents[1];
    if (an.requires_grad) {
      auto &g = an.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * bn.value[i];
      }
    }
    if (bn.requires_grad) {
      auto &g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * an.value[i];
      }
    }
  });
}

template <typename T>
Tensor<T> scale(Tensor<T> const &a, double s)
{
  T const f = static_cast<T>(s);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = f * a.data()[i];
  }
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [f](Node<T> &self) {
    auto &g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += f * self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sum(Tensor<T> const &a)
{
  double s = 0.0;
  for (auto v : a.data()) {
    s += v;
  }
  return make_result<T>({}, {static_cast<T>(s)}, {a.node()}, [](Node<T> &self) {
    auto &g = self.parents[0]->grad_buffer();
    for (auto &v : g) {
      v += self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> complex_l1(Tensor<T> const &pred, Tensor<T> const &target, double eps)
{
  require(pred.shape() == target.shape(),
          "complex_l1: shape mismatch " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  require(pred.shape().size() == 3 && pred.dim(0) == 2, "complex_l1: expected [2, H, W] tensors");
  std::size_t const plane = static_cast<std::size_t>(pred.dim(1)) * pred.dim(2);
  auto const pv = pred.data(), tv = target.data();
  double const eps2 = eps * eps;
  std::vector<T> dre(plane), dim(plane), inv_mag(plane);
  double total = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    double const a = static_cast<double>(pv[p]) - tv[p];
    double const b = static_cast<double>(pv[plane + p]) - tv[plane + p];
    double const m = std::sqrt(a * a + b * b + eps2);
    total += m;
    dre[p] = static_cast<T>(a);
    dim[p] = static_cast<T>(b);
    inv_mag[p] = static_cast<T>(1.0 / m);
  }
  double const n = static_cast<double>(plane);
  return make_result<T>({}, {static_cast<T>(total / n)}, {pred.node(), target.node()},
                        [=, dre = std::move(dre), dim = std::move(dim), inv_mag = std::move(inv_mag)](Node<T> &self) {
                          T const g0 = static_cast<T>(self.grad[0] / n);
                          for (int which = 0; which < 2; ++which) {
                            auto &pn = *self.parents[which];
                            if (!pn.requires_grad) { continue; }
                            T const sign = which == 0 ? T{1} : T{-1};
                            auto &g = pn.grad_buffer();
                            for (std::size_t p = 0; p < plane; ++p) {
                              T const f = sign * g0 * inv_mag[p];
                              g[p] += f * dre[p];
                              g[plane + p] += f * dim[p];
                            }
                          }
                        });
}

#define N2R_INSTANTIATE(T)                                                                                           \
  template class Tensor<T>;                                                                                          \
  template void backward<T>(Tensor<T> const &);                                                                      \
  template Tensor<T> conv2d<T>(Tensor<T> const &, Tensor<T> const &, Tensor<T> const &);                             \
  template Tensor<T> conv_transpose2x2<T>(Tensor<T> const &, Tensor<T> const &, Tensor<T> const &);                  \
  template Tensor<T> instance_norm<T>(Tensor<T> const &, Tensor<T> const &, Tensor<T> const &, double);              \
  template Tensor<T> leaky_relu<T>(Tensor<T> const &, double);                                                       \
  template Tensor<T> avg_pool2<T>(Tensor<T> const &);                                                                \
  template Tensor<T> concat_channels<T>(Tensor<T> const &, Tensor<T> const &);                                       \
  template Tensor<T> add<T>(Tensor<T> const &, Tensor<T> const &);                                                   \
  template Tensor<T> mul<T>(Tensor<T> const &, Tensor<T> const &);                                                   \
  template Tensor<T> scale<T>(Tensor<T> const &, double);                                                            \
  template Tensor<T> sum<T>(Tensor<T> const &);                                                                      \
  template Tensor<T> complex_l1<T>(Tensor<T> const &, Tensor<T> const &, double);

N2R_INSTANTIATE(float)
N2R_INSTANTIATE(double)

} // namespace n2r::nn
