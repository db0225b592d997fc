#include "ladapt/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ladapt {

std::string to_string(Activation act) { return act == Activation::ReLU ? "relu" : "gelu"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu" || name == "ReLU") return Activation::ReLU;
  if (name == "gelu" || name == "GELU") return Activation::GELU;
  throw ConfigError("unknown activation '" + name + "'");
}

namespace {

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B^T, B stored [n x k]
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[m x n] += A^T * B, A stored [k x m], B stored [k x n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T{0}) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename T>
constexpr T gelu_c() {
  return static_cast<T>(0.7978845608028654);  // sqrt(2 / pi)
}
template <typename T>
constexpr T gelu_a() {
  return static_cast<T>(0.044715);
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(av.shape()) + " * " +
                     shape_str(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor<T> out(Shape{m, n});
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  auto an = a.node(), bn = b.node();
  return make_result<T>(
      std::move(out), {a, b},
      [an, bn, m, k, n](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        if (grads[0]) gemm_nt(g.data().data(), bn->value.data().data(), grads[0]->data().data(), m, n, k);
        if (grads[1]) gemm_tn(an->value.data().data(), g.data().data(), grads[1]->data().data(), k, m, n);
      },
      "matmul");
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  const auto& av = a.value();
  require_rank(av, 2, "transpose");
  const std::size_t r = av.rows(), c = av.cols();
  Tensor<T> out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  return make_result<T>(
      std::move(out), {a},
      [r, c](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) grads[0]->at(i, j) += g.at(j, i);
      },
      "transpose");
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  require_rank(xv, 2, "linear");
  require_rank(wv, 2, "linear");
  if (xv.cols() != wv.rows() || bv.numel() != wv.cols()) {
    throw ShapeError("linear: " + shape_str(xv.shape()) + " * " + shape_str(wv.shape()) + " + " +
                     shape_str(bv.shape()));
  }
  const std::size_t m = xv.rows(), k = xv.cols(), n = wv.cols();
  Tensor<T> out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) std::copy(bv.data().begin(), bv.data().end(), out.data().begin() + i * n);
  gemm_nn(xv.data().data(), wv.data().data(), out.data().data(), m, k, n);
  auto xn = x.node(), wn = w.node();
  return make_result<T>(
      std::move(out), {x, w, b},
      [xn, wn, m, k, n](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        if (grads[0]) gemm_nt(g.data().data(), wn->value.data().data(), grads[0]->data().data(), m, n, k);
        if (grads[1]) gemm_tn(xn->value.data().data(), g.data().data(), grads[1]->data().data(), k, m, n);
        if (grads[2]) {
          T* gb = grads[2]->data().data();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
      },
      "linear");
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a.value(), b.value(), "add");
  Tensor<T> out = a.value();
  const auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return make_result<T>(
      std::move(out), {a, b},
      [](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (auto* gr : grads) {
          if (!gr) continue;
          auto d = gr->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
        }
      },
      "add");
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same(a.value(), b.value(), "sub");
  Tensor<T> out = a.value();
  const auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  return make_result<T>(
      std::move(out), {a, b},
      [](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        if (grads[0])
          for (std::size_t i = 0; i < g.numel(); ++i) (*grads[0])[i] += g[i];
        if (grads[1])
          for (std::size_t i = 0; i < g.numel(); ++i) (*grads[1])[i] -= g[i];
      },
      "sub");
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a.value(), b.value(), "mul");
  Tensor<T> out = a.value();
  const auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  auto an = a.node(), bn = b.node();
  return make_result<T>(
      std::move(out), {a, b},
      [an, bn](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        if (grads[0])
          for (std::size_t i = 0; i < g.numel(); ++i) (*grads[0])[i] += g[i] * bn->value[i];
        if (grads[1])
          for (std::size_t i = 0; i < g.numel(); ++i) (*grads[1])[i] += g[i] * an->value[i];
      },
      "mul");
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v *= factor;
  return make_result<T>(
      std::move(out), {a},
      [factor](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t i = 0; i < g.numel(); ++i) (*grads[0])[i] += factor * g[i];
      },
      "scale");
}

template <typename T>
Var<T> add_row(const Var<T>& x, const Var<T>& b) {
  const auto& xv = x.value();
  require_rank(xv, 2, "add_row");
  const std::size_t m = xv.rows(), n = xv.cols();
  if (b.value().numel() != n) {
    throw ShapeError("add_row: " + shape_str(xv.shape()) + " + " + shape_str(b.value().shape()));
  }
  Tensor<T> out = xv;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += b.value()[j];
  return make_result<T>(
      std::move(out), {x, b},
      [m, n](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        if (grads[0])
          for (std::size_t i = 0; i < g.numel(); ++i) (*grads[0])[i] += g[i];
        if (grads[1])
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) (*grads[1])[j] += g[i * n + j];
      },
      "add_row");
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  auto xn = x.node();
  return make_result<T>(
      std::move(out), {x},
      [xn](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t i = 0; i < g.numel(); ++i)
          if (xn->value[i] > T{0}) (*grads[0])[i] += g[i];
      },
      "relu");
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
  constexpr T c = gelu_c<T>();
  constexpr T a = gelu_a<T>();
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = T(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v)));
  auto xn = x.node();
  return make_result<T>(
      std::move(out), {x},
      [xn](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const T v = xn->value[i];
          const T t = std::tanh(c * (v + a * v * v * v));
          const T d = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * c * (T(1) + T(3) * a * v * v);
          (*grads[0])[i] += g[i] * d;
        }
      },
      "gelu");
}

template <typename T>
Var<T> activate(const Var<T>& x, Activation act) {
  return act == Activation::ReLU ? relu(x) : gelu(x);
}

template <typename T>
Var<T> softmax(const Var<T>& x, std::size_t axis) {
  const auto s = split_axis(x.value().shape(), axis, "softmax");
  Tensor<T> out = x.value();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      T* base = out.data().data() + o * s.n * s.inner + in;
      T mx = base[0];
      for (std::size_t i = 1; i < s.n; ++i) mx = std::max(mx, base[i * s.inner]);
      T total = 0;
      for (std::size_t i = 0; i < s.n; ++i) {
        base[i * s.inner] = std::exp(base[i * s.inner] - mx);
        total += base[i * s.inner];
      }
      for (std::size_t i = 0; i < s.n; ++i) base[i * s.inner] /= total;
    }
  }
  auto y = std::make_shared<Tensor<T>>(out);
  return make_result<T>(
      std::move(out), {x},
      [y, s](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t off = o * s.n * s.inner + in;
            T dot = 0;
            for (std::size_t i = 0; i < s.n; ++i) dot += g[off + i * s.inner] * (*y)[off + i * s.inner];
            for (std::size_t i = 0; i < s.n; ++i) {
              const std::size_t idx = off + i * s.inner;
              (*grads[0])[idx] += (*y)[idx] * (g[idx] - dot);
            }
          }
        }
      },
      "softmax");
}

template <typename T>
Var<T> log_softmax(const Var<T>& x, std::size_t axis) {
  const auto s = split_axis(x.value().shape(), axis, "log_softmax");
  Tensor<T> out = x.value();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      T* base = out.data().data() + o * s.n * s.inner + in;
      T mx = base[0];
      for (std::size_t i = 1; i < s.n; ++i) mx = std::max(mx, base[i * s.inner]);
      T total = 0;
      for (std::size_t i = 0; i < s.n; ++i) total += std::exp(base[i * s.inner] - mx);
      const T lse = mx + std::log(total);
      for (std::size_t i = 0; i < s.n; ++i) base[i * s.inner] -= lse;
    }
  }
  auto y = std::make_shared<Tensor<T>>(out);
  return make_result<T>(
      std::move(out), {x},
      [y, s](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t off = o * s.n * s.inner + in;
            T gsum = 0;
            for (std::size_t i = 0; i < s.n; ++i) gsum += g[off + i * s.inner];
            for (std::size_t i = 0; i < s.n; ++i) {
              const std::size_t idx = off + i * s.inner;
              (*grads[0])[idx] += g[idx] - std::exp((*y)[idx]) * gsum;
            }
          }
        }
      },
      "log_softmax");
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const auto& xv = x.value();
  if (xv.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = xv.shape().back();
  if (gamma.value().numel() != d || beta.value().numel() != d) {
    throw ShapeError("layer_norm: last dimension " + std::to_string(d) + " vs gamma " +
                     shape_str(gamma.value().shape()) + ", beta " + shape_str(beta.value().shape()));
  }
  if (!(eps > T{0})) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t rows = d ? xv.numel() / d : 0;
  auto xhat = std::make_shared<Tensor<T>>(xv.shape());
  auto inv = std::make_shared<std::vector<T>>(rows);
  Tensor<T> out(xv.shape());
  const T* gm = gamma.value().data().data();
  const T* bt = beta.value().data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data().data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (in[j] - mu) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gm[j] + bt[j];
    }
  }
  auto gn = gamma.node();
  return make_result<T>(
      std::move(out), {x, gamma, beta},
      [xhat, inv, gn, rows, d](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        const T* gm = gn->value.data().data();
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gr = g.data().data() + r * d;
          const T* h = xhat->data().data() + r * d;
          if (grads[1])
            for (std::size_t j = 0; j < d; ++j) (*grads[1])[j] += gr[j] * h[j];
          if (grads[2])
            for (std::size_t j = 0; j < d; ++j) (*grads[2])[j] += gr[j];
          if (grads[0]) {
            T sum_gy = 0, sum_gyh = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const T gy = gr[j] * gm[j];
              sum_gy += gy;
              sum_gyh += gy * h[j];
            }
            const T inv_d = T(1) / static_cast<T>(d);
            T* gx = grads[0]->data().data() + r * d;
            for (std::size_t j = 0; j < d; ++j) {
              gx[j] += (*inv)[r] * (gr[j] * gm[j] - inv_d * sum_gy - h[j] * inv_d * sum_gyh);
            }
          }
        }
      },
      "layer_norm");
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T total = 0;
  for (T v : x.value().data()) total += v;
  return make_result<T>(
      Tensor<T>::scalar(total), {x},
      [](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        const T gv = g[0];
        for (auto& v : grads[0]->data()) v += gv;
      },
      "sum");
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const std::size_t n = x.value().numel();
  if (n == 0) throw ShapeError("mean: empty tensor");
  T total = 0;
  for (T v : x.value().data()) total += v;
  return make_result<T>(
      Tensor<T>::scalar(total / static_cast<T>(n)), {x},
      [n](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        const T gv = g[0] / static_cast<T>(n);
        for (auto& v : grads[0]->data()) v += gv;
      },
      "mean");
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  if (shape_numel(shape) != x.value().numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor<T> out(std::move(shape), x.value().storage());
  return make_result<T>(
      std::move(out), {x},
      [](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t i = 0; i < g.numel(); ++i) (*grads[0])[i] += g[i];
      },
      "reshape");
}

template <typename T>
Var<T> mean_over_time(const Var<T>& x) {
  const auto& xv = x.value();
  require_rank(xv, 2, "mean_over_time");
  const std::size_t frames = xv.rows(), d = xv.cols();
  if (frames == 0) throw ShapeError("mean_over_time: empty sequence");
  Tensor<T> out(Shape{d});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < d; ++j) out[j] += xv.at(t, j);
  for (auto& v : out.data()) v /= static_cast<T>(frames);
  return make_result<T>(
      std::move(out), {x},
      [frames, d](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        const T s = T(1) / static_cast<T>(frames);
        for (std::size_t t = 0; t < frames; ++t)
          for (std::size_t j = 0; j < d; ++j) grads[0]->at(t, j) += g[j] * s;
      },
      "mean_over_time");
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p.value(), 2, "concat_cols");
    if (p.value().rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor<T> out(Shape{rows, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < widths[k]; ++j) out.at(r, off + j) = parts[k].value().at(r, j);
    off += widths[k];
  }
  return make_result<T>(
      std::move(out), parts,
      [rows, widths, total](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          if (grads[k])
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < widths[k]; ++j) grads[k]->at(r, j) += g[r * total + off + j];
          off += widths[k];
        }
      },
      "concat_cols");
}

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t end) {
  const auto& xv = x.value();
  require_rank(xv, 2, "slice_cols");
  if (begin > end || end > xv.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(xv.shape()));
  }
  const std::size_t rows = xv.rows(), w = end - begin;
  Tensor<T> out(Shape{rows, w});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j) out.at(r, j) = xv.at(r, begin + j);
  return make_result<T>(
      std::move(out), {x},
      [rows, w, begin](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < w; ++j) grads[0]->at(r, begin + j) += g[r * w + j];
      },
      "slice_cols");
}

template <typename T>
Var<T> select_rows(const Var<T>& x, std::span<const std::size_t> rows) {
  const auto& xv = x.value();
  require_rank(xv, 2, "select_rows");
  const std::size_t d = xv.cols();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor<T> out(Shape{idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= xv.rows()) throw ShapeError("select_rows: row index out of range");
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = xv.at(idx[i], j);
  }
  return make_result<T>(
      std::move(out), {x},
      [idx, d](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t j = 0; j < d; ++j) grads[0]->at(idx[i], j) += g[i * d + j];
      },
      "select_rows");
}

template <typename T>
Var<T> replace_rows(const Var<T>& x, std::span<const std::size_t> rows, const Var<T>& v) {
  const auto& xv = x.value();
  require_rank(xv, 2, "replace_rows");
  const std::size_t n = xv.rows(), d = xv.cols();
  if (v.value().numel() != d) {
    throw ShapeError("replace_rows: replacement " + shape_str(v.shape()) + " vs rows of " +
                     shape_str(xv.shape()));
  }
  std::vector<char> mask(n, 0);
  for (std::size_t r : rows) {
    if (r >= n) throw ShapeError("replace_rows: row index out of range");
    mask[r] = 1;
  }
  Tensor<T> out = xv;
  for (std::size_t r = 0; r < n; ++r)
    if (mask[r])
      for (std::size_t j = 0; j < d; ++j) out.at(r, j) = v.value()[j];
  return make_result<T>(
      std::move(out), {x, v},
      [mask, n, d](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < d; ++j) {
            if (mask[r]) {
              if (grads[1]) (*grads[1])[j] += g[r * d + j];
            } else if (grads[0]) {
              grads[0]->at(r, j) += g[r * d + j];
            }
          }
        }
      },
      "replace_rows");
}

template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& parts, const Var<T>& weights) {
  if (parts.empty()) throw ShapeError("weighted_sum: no operands");
  const auto& wv = weights.value();
  if (wv.numel() != parts.size()) {
    throw ShapeError("weighted_sum: " + std::to_string(parts.size()) + " operands but weights " +
                     shape_str(wv.shape()));
  }
  const Shape& shape = parts[0].shape();
  for (const auto& p : parts) require_same(parts[0].value(), p.value(), "weighted_sum");
  Tensor<T> out(shape);
  for (std::size_t l = 0; l < parts.size(); ++l) {
    const T w = wv[l];
    const auto pd = parts[l].value().data();
    for (std::size_t i = 0; i < pd.size(); ++i) out[i] += w * pd[i];
  }
  std::vector<Var<T>> operands = parts;
  operands.push_back(weights);
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const auto& p : operands) nodes.push_back(p.node());
  return make_result<T>(
      std::move(out), operands,
      [nodes](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        const std::size_t count = nodes.size() - 1;
        const auto& wv = nodes.back()->value;
        for (std::size_t l = 0; l < count; ++l) {
          const auto& a = nodes[l]->value;
          if (grads[l])
            for (std::size_t i = 0; i < g.numel(); ++i) (*grads[l])[i] += wv[l] * g[i];
          if (grads[count]) {
            T dot = 0;
            for (std::size_t i = 0; i < g.numel(); ++i) dot += a[i] * g[i];
            (*grads[count])[l] += dot;
          }
        }
      },
      "weighted_sum");
}

template <typename T>
Var<T> multi_head_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                            std::size_t num_heads) {
  const auto& qv = q.value();
  require_rank(qv, 2, "multi_head_attention");
  require_same(qv, k.value(), "multi_head_attention");
  require_same(qv, v.value(), "multi_head_attention");
  const std::size_t n = qv.rows(), d = qv.cols();
  if (num_heads == 0 || d % num_heads != 0) {
    throw ShapeError("multi_head_attention: " + std::to_string(num_heads) +
                     " heads do not divide width " + std::to_string(d));
  }
  const std::size_t dh = d / num_heads;
  const T s = T(1) / std::sqrt(static_cast<T>(dh));
  const T* Q = qv.data().data();
  const T* K = k.value().data().data();
  const T* V = v.value().data().data();
  auto probs = std::make_shared<std::vector<T>>(num_heads * n * n);
  Tensor<T> out(Shape{n, d});
  for (std::size_t h = 0; h < num_heads; ++h) {
    const std::size_t c0 = h * dh;
    T* P = probs->data() + h * n * n;
    for (std::size_t i = 0; i < n; ++i) {
      T* prow = P + i * n;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        T acc = 0;
        for (std::size_t c = 0; c < dh; ++c) acc += Q[i * d + c0 + c] * K[j * d + c0 + c];
        prow[j] = acc * s;
        mx = std::max(mx, prow[j]);
      }
      T total = 0;
      for (std::size_t j = 0; j < n; ++j) {
        prow[j] = std::exp(prow[j] - mx);
        total += prow[j];
      }
      for (std::size_t j = 0; j < n; ++j) prow[j] /= total;
      T* orow = out.data().data() + i * d + c0;
      for (std::size_t j = 0; j < n; ++j) {
        const T p = prow[j];
        const T* vrow = V + j * d + c0;
        for (std::size_t c = 0; c < dh; ++c) orow[c] += p * vrow[c];
      }
    }
  }
  auto qn = q.node(), kn = k.node(), vn = v.node();
  return make_result<T>(
      std::move(out), {q, k, v},
      [qn, kn, vn, probs, n, d, dh, num_heads, s](const Tensor<T>& g,
                                                  std::vector<Tensor<T>*>& grads) {
        const T* Q = qn->value.data().data();
        const T* K = kn->value.data().data();
        const T* V = vn->value.data().data();
        std::vector<T> dS(n * n);
        for (std::size_t h = 0; h < num_heads; ++h) {
          const std::size_t c0 = h * dh;
          const T* P = probs->data() + h * n * n;
          for (std::size_t i = 0; i < n; ++i) {
            const T* grow = g.data().data() + i * d + c0;
            T dot = 0;
            for (std::size_t j = 0; j < n; ++j) {
              T dp = 0;
              for (std::size_t c = 0; c < dh; ++c) dp += grow[c] * V[j * d + c0 + c];
              dS[i * n + j] = dp;
              dot += dp * P[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) dS[i * n + j] = P[i * n + j] * (dS[i * n + j] - dot) * s;
            if (grads[2]) {
              for (std::size_t j = 0; j < n; ++j) {
                const T p = P[i * n + j];
                T* gv = grads[2]->data().data() + j * d + c0;
                for (std::size_t c = 0; c < dh; ++c) gv[c] += p * grow[c];
              }
            }
          }
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              const T ds = dS[i * n + j];
              if (ds == T{0}) continue;
              if (grads[0]) {
                T* gq = grads[0]->data().data() + i * d + c0;
                for (std::size_t c = 0; c < dh; ++c) gq[c] += ds * K[j * d + c0 + c];
              }
              if (grads[1]) {
                T* gk = grads[1]->data().data() + j * d + c0;
                for (std::size_t c = 0; c < dh; ++c) gk[c] += ds * Q[i * d + c0 + c];
              }
            }
          }
        }
      },
      "multi_head_attention");
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::size_t label) {
  const auto& lv = logits.value();
  const std::size_t c = lv.numel();
  if (lv.rank() > 1 || c == 0) {
    throw ShapeError("cross_entropy: expected logits of shape [C], got " + shape_str(lv.shape()));
  }
  if (label >= c) {
    throw ConfigError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                      std::to_string(c) + " classes");
  }
  T mx = lv[0];
  for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, lv[i]);
  T total = 0;
  for (std::size_t i = 0; i < c; ++i) total += std::exp(lv[i] - mx);
  const T lse = mx + std::log(total);
  auto ln = logits.node();
  return make_result<T>(
      Tensor<T>::scalar(lse - lv[label]), {logits},
      [ln, lse, label, c](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        for (std::size_t i = 0; i < c; ++i) {
          const T p = std::exp(ln->value[i] - lse);
          (*grads[0])[i] += g[0] * (p - (i == label ? T(1) : T(0)));
        }
      },
      "cross_entropy");
}

template <typename T>
Var<T> mse(const Var<T>& pred, const Tensor<T>& target) {
  require_same(pred.value(), target, "mse");
  const std::size_t n = target.numel();
  if (n == 0) throw ShapeError("mse: empty tensors");
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T e = pred.value()[i] - target[i];
    total += e * e;
  }
  auto pn = pred.node();
  auto tg = std::make_shared<Tensor<T>>(target);
  return make_result<T>(
      Tensor<T>::scalar(total / static_cast<T>(n)), {pred},
      [pn, tg, n](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        const T f = T(2) * g[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) (*grads[0])[i] += f * (pn->value[i] - (*tg)[i]);
      },
      "mse");
}

#define LADAPT_INSTANTIATE_OPS(T)                                                              \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                        \
  template Var<T> transpose(const Var<T>&);                                                    \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                         \
  template Var<T> add(const Var<T>&, const Var<T>&);                                           \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                           \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                           \
  template Var<T> scale(const Var<T>&, T);                                                     \
  template Var<T> reshape(const Var<T>&, Shape);                                               \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                                       \
  template Var<T> relu(const Var<T>&);                                                         \
  template Var<T> gelu(const Var<T>&);                                                         \
  template Var<T> activate(const Var<T>&, Activation);                                         \
  template Var<T> softmax(const Var<T>&, std::size_t);                                         \
  template Var<T> log_softmax(const Var<T>&, std::size_t);                                     \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                  \
  template Var<T> sum(const Var<T>&);                                                          \
  template Var<T> mean(const Var<T>&);                                                         \
  template Var<T> mean_over_time(const Var<T>&);                                               \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                     \
  template Var<T> slice_cols(const Var<T>&, std::size_t, std::size_t);                         \
  template Var<T> select_rows(const Var<T>&, std::span<const std::size_t>);                    \
  template Var<T> replace_rows(const Var<T>&, std::span<const std::size_t>, const Var<T>&);    \
  template Var<T> weighted_sum(const std::vector<Var<T>>&, const Var<T>&);                     \
  template Var<T> multi_head_attention(const Var<T>&, const Var<T>&, const Var<T>&,            \
                                       std::size_t);                                           \
  template Var<T> cross_entropy(const Var<T>&, std::size_t);                                   \
  template Var<T> mse(const Var<T>&, const Tensor<T>&);

LADAPT_INSTANTIATE_OPS(float)
LADAPT_INSTANTIATE_OPS(double)

}  // namespace ladapt
