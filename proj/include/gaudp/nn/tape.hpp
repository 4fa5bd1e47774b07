#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gaudp/nn/tensor.hpp"

namespace gaudp::nn {

// Reverse-mode tape over dense tensors. One tape per forward pass; ops
// append a value node plus a backward closure, backward() runs closures in
// reverse creation order. Scalars live as [1] tensors.
//
// Layout conventions: token matrices are [T,F]; feature maps are [C,H,W];
// linear weights are [in,out]; conv weights are [Cout,Cin,kh,kw].
template <typename T>
class Tape {
 public:
  using Ten = Tensor<T>;

  int leaf(Ten value, bool needs_grad = false) {
    return push(std::move(value), needs_grad, nullptr);
  }

  const Ten& val(int id) const { return nodes_[id].value; }
  Ten& grad(int id) { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  // ---- elementwise ----

  int add(int a, int b) {
    check_same_shape("add", val(a).shape, val(b).shape);
    Ten out = val(a);
    const Ten& vb = val(b);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
    return push(std::move(out), needs_grad(a) || needs_grad(b), [this, a, b](int id) {
      const Ten& g = grad(id);
      accumulate(a, g);
      accumulate(b, g);
    });
  }

  int scale(int a, T s) {
    Ten out = val(a);
    for (auto& v : out.data) v *= s;
    return push(std::move(out), needs_grad(a), [this, a, s](int id) {
      const Ten& g = grad(id);
      Ten ga = g;
      for (auto& v : ga.data) v *= s;
      accumulate(a, ga);
    });
  }

  int mul(int a, int b) {
    check_same_shape("mul", val(a).shape, val(b).shape);
    Ten out = val(a);
    const Ten& vb = val(b);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= vb[i];
    return push(std::move(out), needs_grad(a) || needs_grad(b), [this, a, b](int id) {
      const Ten& g = grad(id);
      Ten ga = g, gb = g;
      for (std::size_t i = 0; i < g.numel(); ++i) {
        ga[i] *= val(b)[i];
        gb[i] *= val(a)[i];
      }
      accumulate(a, ga);
      accumulate(b, gb);
    });
  }

  int gelu(int a) {
    const Ten& x = val(a);
    Ten out = x;
    for (auto& v : out.data) {
      double xv = static_cast<double>(v);
      v = static_cast<T>(xv * 0.5 * (1.0 + std::erf(xv * 0.7071067811865475)));
    }
    return push(std::move(out), needs_grad(a), [this, a](int id) {
      const Ten& g = grad(id);
      const Ten& x = val(a);
      Ten ga = g;
      for (std::size_t i = 0; i < g.numel(); ++i) {
        double xv = static_cast<double>(x[i]);
        double phi = 0.5 * (1.0 + std::erf(xv * 0.7071067811865475));
        double pdf = 0.3989422804014327 * std::exp(-0.5 * xv * xv);
        ga[i] = static_cast<T>(static_cast<double>(g[i]) * (phi + xv * pdf));
      }
      accumulate(a, ga);
    });
  }

  // ---- dense / tokens ----

  // x [T,in] * w [in,out] + b [out]; pass b = -1 for no bias.
  int linear(int x, int w, int b) {
    const Ten& xv = val(x);
    const Ten& wv = val(w);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0))
      throw ConfigError("linear: bad shapes " + xv.shape_str() + " x " + wv.shape_str());
    std::size_t t = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(1);
    Ten out({t, out_dim});
    for (std::size_t i = 0; i < t; ++i) {
      T* orow = &out.data[i * out_dim];
      if (b >= 0) {
        const Ten& bv = val(b);
        for (std::size_t o = 0; o < out_dim; ++o) orow[o] = bv[o];
      }
      const T* xrow = &xv.data[i * in];
      for (std::size_t k = 0; k < in; ++k) {
        T xk = xrow[k];
        const T* wrow = &wv.data[k * out_dim];
        for (std::size_t o = 0; o < out_dim; ++o) orow[o] += xk * wrow[o];
      }
    }
    bool ng = needs_grad(x) || needs_grad(w) || (b >= 0 && needs_grad(b));
    return push(std::move(out), ng, [this, x, w, b](int id) {
      const Ten& g = grad(id);
      const Ten& xv = val(x);
      const Ten& wv = val(w);
      std::size_t t = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(1);
      if (needs_grad(x)) {
        Ten gx({t, in});
        for (std::size_t i = 0; i < t; ++i)
          for (std::size_t k = 0; k < in; ++k) {
            const T* wrow = &wv.data[k * out_dim];
            const T* grow = &g.data[i * out_dim];
            T acc = 0;
            for (std::size_t o = 0; o < out_dim; ++o) acc += grow[o] * wrow[o];
            gx.data[i * in + k] = acc;
          }
        accumulate(x, gx);
      }
      if (needs_grad(w)) {
        Ten gw({in, out_dim});
        for (std::size_t i = 0; i < t; ++i) {
          const T* xrow = &xv.data[i * in];
          const T* grow = &g.data[i * out_dim];
          for (std::size_t k = 0; k < in; ++k) {
            T xk = xrow[k];
            T* gwrow = &gw.data[k * out_dim];
            for (std::size_t o = 0; o < out_dim; ++o) gwrow[o] += xk * grow[o];
          }
        }
        accumulate(w, gw);
      }
      if (b >= 0 && needs_grad(b)) {
        Ten gb({out_dim});
        for (std::size_t i = 0; i < t; ++i)
          for (std::size_t o = 0; o < out_dim; ++o) gb[o] += g.data[i * out_dim + o];
        accumulate(b, gb);
      }
    });
  }

  // a [M,K] * b [K,N]
  int matmul(int a, int b) {
    const Ten& av = val(a);
    const Ten& bv = val(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
      throw ConfigError("matmul: bad shapes " + av.shape_str() + " x " + bv.shape_str());
    std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Ten out({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        T apk = av.data[i * k + p];
        const T* brow = &bv.data[p * n];
        T* orow = &out.data[i * n];
        for (std::size_t j = 0; j < n; ++j) orow[j] += apk * brow[j];
      }
    return push(std::move(out), needs_grad(a) || needs_grad(b), [this, a, b](int id) {
      const Ten& g = grad(id);
      const Ten& av = val(a);
      const Ten& bv = val(b);
      std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
      if (needs_grad(a)) {  // ga = g * b^T
        Ten ga({m, k});
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const T* grow = &g.data[i * n];
            const T* brow = &bv.data[p * n];
            T acc = 0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga.data[i * k + p] = acc;
          }
        accumulate(a, ga);
      }
      if (needs_grad(b)) {  // gb = a^T * g
        Ten gb({k, n});
        for (std::size_t i = 0; i < m; ++i) {
          const T* grow = &g.data[i * n];
          for (std::size_t p = 0; p < k; ++p) {
            T apk = av.data[i * k + p];
            T* gbrow = &gb.data[p * n];
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += apk * grow[j];
          }
        }
        accumulate(b, gb);
      }
    });
  }

  // a [M,K] * b[N,K]^T -> [M,N]
  int matmul_nt(int a, int b) {
    const Ten& av = val(a);
    const Ten& bv = val(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
      throw ConfigError("matmul_nt: bad shapes " + av.shape_str() + " x " + bv.shape_str());
    std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
    Ten out({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const T* arow = &av.data[i * k];
        const T* brow = &bv.data[j * k];
        T acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        out.data[i * n + j] = acc;
      }
    return push(std::move(out), needs_grad(a) || needs_grad(b), [this, a, b](int id) {
      const Ten& g = grad(id);
      const Ten& av = val(a);
      const Ten& bv = val(b);
      std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
      if (needs_grad(a)) {  // ga = g * b
        Ten ga({m, k});
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            T gij = g.data[i * n + j];
            const T* brow = &bv.data[j * k];
            T* garow = &ga.data[i * k];
            for (std::size_t p = 0; p < k; ++p) garow[p] += gij * brow[p];
          }
        accumulate(a, ga);
      }
      if (needs_grad(b)) {  // gb = g^T * a
        Ten gb({n, k});
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            T gij = g.data[i * n + j];
            const T* arow = &av.data[i * k];
            T* gbrow = &gb.data[j * k];
            for (std::size_t p = 0; p < k; ++p) gbrow[p] += gij * arow[p];
          }
        accumulate(b, gb);
      }
    });
  }

  int layernorm(int x, int gamma, int beta, T eps = static_cast<T>(1e-5)) {
    const Ten& xv = val(x);
    std::size_t f = xv.shape.back();
    std::size_t rows = xv.numel() / f;
    Ten out = xv;
    for (std::size_t r = 0; r < rows; ++r) {
      T* row = &out.data[r * f];
      T mean = 0;
      for (std::size_t i = 0; i < f; ++i) mean += row[i];
      mean /= static_cast<T>(f);
      T var = 0;
      for (std::size_t i = 0; i < f; ++i) var += (row[i] - mean) * (row[i] - mean);
      var /= static_cast<T>(f);
      T inv = static_cast<T>(1) / std::sqrt(var + eps);
      for (std::size_t i = 0; i < f; ++i)
        row[i] = (row[i] - mean) * inv * val(gamma)[i] + val(beta)[i];
    }
    bool ng = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    return push(std::move(out), ng, [this, x, gamma, beta, eps](int id) {
      const Ten& g = grad(id);
      const Ten& xv = val(x);
      std::size_t f = xv.shape.back();
      std::size_t rows = xv.numel() / f;
      Ten gx(xv.shape), ggamma({f}), gbeta({f});
      for (std::size_t r = 0; r < rows; ++r) {
        const T* xrow = &xv.data[r * f];
        const T* grow = &g.data[r * f];
        T mean = 0;
        for (std::size_t i = 0; i < f; ++i) mean += xrow[i];
        mean /= static_cast<T>(f);
        T var = 0;
        for (std::size_t i = 0; i < f; ++i) var += (xrow[i] - mean) * (xrow[i] - mean);
        var /= static_cast<T>(f);
        T inv = static_cast<T>(1) / std::sqrt(var + eps);
        // dgamma/dbeta plus the standard layernorm input gradient
        T sum_gg = 0, sum_ggx = 0;
        for (std::size_t i = 0; i < f; ++i) {
          T xhat = (xrow[i] - mean) * inv;
          T gg = grow[i] * val(gamma)[i];
          ggamma[i] += grow[i] * xhat;
          gbeta[i] += grow[i];
          sum_gg += gg;
          sum_ggx += gg * xhat;
        }
        for (std::size_t i = 0; i < f; ++i) {
          T xhat = (xrow[i] - mean) * inv;
          T gg = grow[i] * val(gamma)[i];
          gx.data[r * f + i] =
              (gg - sum_gg / static_cast<T>(f) - xhat * sum_ggx / static_cast<T>(f)) * inv;
        }
      }
      accumulate(x, gx);
      if (needs_grad(gamma)) accumulate(gamma, ggamma);
      if (needs_grad(beta)) accumulate(beta, gbeta);
    });
  }

  int softmax_lastdim(int x) {
    const Ten& xv = val(x);
    std::size_t f = xv.shape.back();
    std::size_t rows = xv.numel() / f;
    Ten out = xv;
    for (std::size_t r = 0; r < rows; ++r) {
      T* row = &out.data[r * f];
      T mx = row[0];
      for (std::size_t i = 1; i < f; ++i) mx = std::max(mx, row[i]);
      T sum = 0;
      for (std::size_t i = 0; i < f; ++i) {
        row[i] = std::exp(row[i] - mx);
        sum += row[i];
      }
      for (std::size_t i = 0; i < f; ++i) row[i] /= sum;
    }
    return push(std::move(out), needs_grad(x), [this, x](int id) {
      const Ten& g = grad(id);
      const Ten& p = val(id);
      std::size_t f = p.shape.back();
      std::size_t rows = p.numel() / f;
      Ten gx(p.shape);
      for (std::size_t r = 0; r < rows; ++r) {
        const T* prow = &p.data[r * f];
        const T* grow = &g.data[r * f];
        T dot = 0;
        for (std::size_t i = 0; i < f; ++i) dot += prow[i] * grow[i];
        for (std::size_t i = 0; i < f; ++i) gx.data[r * f + i] = prow[i] * (grow[i] - dot);
      }
      accumulate(x, gx);
    });
  }

  // ---- convolutional ----

  // x [Cin,H,W], w [Cout,Cin,kh,kw], bias optional. Output [Cout,Ho,Wo].
  int conv2d(int x, int w, int b, int stride, int pad) {
    const Ten& xv = val(x);
    const Ten& wv = val(w);
    if (xv.rank() != 3 || wv.rank() != 4 || xv.dim(0) != wv.dim(1))
      throw ConfigError("conv2d: bad shapes " + xv.shape_str() + " w " + wv.shape_str());
    std::size_t ci = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
    std::size_t co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    std::size_t ho = (h + 2 * pad - kh) / stride + 1;
    std::size_t wo = (wd + 2 * pad - kw) / stride + 1;
    Ten out({co, ho, wo});
    if (b >= 0) {
      const Ten& bv = val(b);
      for (std::size_t c = 0; c < co; ++c)
        for (std::size_t i = 0; i < ho * wo; ++i) out.data[c * ho * wo + i] = bv[c];
    }
    conv_forward(xv, wv, out, stride, pad);
    bool ng = needs_grad(x) || needs_grad(w) || (b >= 0 && needs_grad(b));
    return push(std::move(out), ng, [this, x, w, b, stride, pad](int id) {
      const Ten& g = grad(id);
      const Ten& xv = val(x);
      const Ten& wv = val(w);
      if (needs_grad(x)) {
        Ten gx(xv.shape);
        conv_backward_data(g, wv, gx, stride, pad);
        accumulate(x, gx);
      }
      if (needs_grad(w)) {
        Ten gw(wv.shape);
        conv_backward_weights(g, xv, gw, stride, pad);
        accumulate(w, gw);
      }
      if (b >= 0 && needs_grad(b)) {
        std::size_t co = g.dim(0), plane = g.dim(1) * g.dim(2);
        Ten gb({co});
        for (std::size_t c = 0; c < co; ++c)
          for (std::size_t i = 0; i < plane; ++i) gb[c] += g.data[c * plane + i];
        accumulate(b, gb);
      }
    });
  }

  // Non-overlapping k x k mean pooling; H,W must divide by k.
  int avg_pool2d(int x, int k) {
    const Ten& xv = val(x);
    if (xv.rank() != 3 || xv.dim(1) % k || xv.dim(2) % k)
      throw ConfigError("avg_pool2d: dims " + xv.shape_str() + " not divisible by k");
    std::size_t c = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
    std::size_t ho = h / k, wo = wd / k;
    Ten out({c, ho, wo});
    T norm = static_cast<T>(1) / static_cast<T>(k * k);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          T acc = 0;
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx)
              acc += xv.data[(ch * h + oy * k + dy) * wd + ox * k + dx];
          out.data[(ch * ho + oy) * wo + ox] = acc * norm;
        }
    return push(std::move(out), needs_grad(x), [this, x, k](int id) {
      const Ten& g = grad(id);
      const Ten& xv = val(x);
      std::size_t c = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
      std::size_t ho = h / k, wo = wd / k;
      T norm = static_cast<T>(1) / static_cast<T>(k * k);
      Ten gx(xv.shape);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t oy = 0; oy < ho; ++oy)
          for (std::size_t ox = 0; ox < wo; ++ox) {
            T gv = g.data[(ch * ho + oy) * wo + ox] * norm;
            for (int dy = 0; dy < k; ++dy)
              for (int dx = 0; dx < k; ++dx)
                gx.data[(ch * h + oy * k + dy) * wd + ox * k + dx] += gv;
          }
      accumulate(x, gx);
    });
  }

  // [C,H,W] -> [H*W, C] token matrix (row-major over pixels).
  int tokens_from_chw(int x) {
    const Ten& xv = val(x);
    if (xv.rank() != 3) throw ConfigError("tokens_from_chw: expected [C,H,W]");
    std::size_t c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    Ten out({hw, c});
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) out.data[p * c + ch] = xv.data[ch * hw + p];
    return push(std::move(out), needs_grad(x), [this, x](int id) {
      const Ten& g = grad(id);
      const Ten& xv = val(x);
      std::size_t c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
      Ten gx(xv.shape);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < hw; ++p) gx.data[ch * hw + p] = g.data[p * c + ch];
      accumulate(x, gx);
    });
  }

  int concat_chw(int a, int b) {
    const Ten& av = val(a);
    const Ten& bv = val(b);
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
      throw ConfigError("concat_chw: spatial dims differ");
    std::size_t plane = av.dim(1) * av.dim(2);
    Ten out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
    std::copy(av.data.begin(), av.data.end(), out.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.numel());
    return push(std::move(out), needs_grad(a) || needs_grad(b), [this, a, b](int id) {
      const Ten& g = grad(id);
      const Ten& av = val(a);
      const Ten& bv = val(b);
      if (needs_grad(a)) {
        Ten ga(av.shape);
        std::copy(g.data.begin(), g.data.begin() + av.numel(), ga.data.begin());
        accumulate(a, ga);
      }
      if (needs_grad(b)) {
        Ten gb(bv.shape);
        std::copy(g.data.begin() + av.numel(), g.data.end(), gb.data.begin());
        accumulate(b, gb);
      }
    });
  }

  int concat_rows(const std::vector<int>& parts) {
    if (parts.empty()) throw ConfigError("concat_rows: empty");
    std::size_t f = val(parts[0]).dim(1), rows = 0;
    bool ng = false;
    for (int p : parts) {
      if (val(p).rank() != 2 || val(p).dim(1) != f)
        throw ConfigError("concat_rows: widths differ");
      rows += val(p).dim(0);
      ng = ng || needs_grad(p);
    }
    Ten out({rows, f});
    std::size_t off = 0;
    for (int p : parts) {
      const Ten& v = val(p);
      std::copy(v.data.begin(), v.data.end(), out.data.begin() + off);
      off += v.numel();
    }
    return push(std::move(out), ng, [this, parts](int id) {
      const Ten& g = grad(id);
      std::size_t off = 0;
      for (int p : parts) {
        const Ten& v = val(p);
        if (needs_grad(p)) {
          Ten gp(v.shape);
          std::copy(g.data.begin() + off, g.data.begin() + off + v.numel(), gp.data.begin());
          accumulate(p, gp);
        }
        off += v.numel();
      }
    });
  }

  int slice_rows(int x, std::size_t lo, std::size_t hi) {
    const Ten& xv = val(x);
    if (xv.rank() != 2 || hi > xv.dim(0) || lo >= hi) throw ConfigError("slice_rows: bad range");
    std::size_t f = xv.dim(1);
    Ten out({hi - lo, f});
    std::copy(xv.data.begin() + lo * f, xv.data.begin() + hi * f, out.data.begin());
    return push(std::move(out), needs_grad(x), [this, x, lo, hi](int id) {
      const Ten& g = grad(id);
      const Ten& xv = val(x);
      std::size_t f = xv.dim(1);
      Ten gx(xv.shape);
      std::copy(g.data.begin(), g.data.end(), gx.data.begin() + lo * f);
      accumulate(x, gx);
    });
  }

  int slice_cols(int x, std::size_t lo, std::size_t hi) {
    const Ten& xv = val(x);
    if (xv.rank() != 2 || hi > xv.dim(1) || lo >= hi) throw ConfigError("slice_cols: bad range");
    std::size_t t = xv.dim(0), f = xv.dim(1), n = hi - lo;
    Ten out({t, n});
    for (std::size_t i = 0; i < t; ++i)
      std::copy(&xv.data[i * f + lo], &xv.data[i * f + hi], &out.data[i * n]);
    return push(std::move(out), needs_grad(x), [this, x, lo, hi](int id) {
      const Ten& g = grad(id);
      const Ten& xv = val(x);
      std::size_t t = xv.dim(0), f = xv.dim(1), n = hi - lo;
      Ten gx(xv.shape);
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < n; ++j) gx.data[i * f + lo + j] = g.data[i * n + j];
      accumulate(x, gx);
    });
  }

  int concat_cols(const std::vector<int>& parts) {
    if (parts.empty()) throw ConfigError("concat_cols: empty");
    std::size_t t = val(parts[0]).dim(0), f = 0;
    bool ng = false;
    for (int p : parts) {
      if (val(p).rank() != 2 || val(p).dim(0) != t) throw ConfigError("concat_cols: rows differ");
      f += val(p).dim(1);
      ng = ng || needs_grad(p);
    }
    Ten out({t, f});
    std::size_t off = 0;
    for (int p : parts) {
      const Ten& v = val(p);
      std::size_t pf = v.dim(1);
      for (std::size_t i = 0; i < t; ++i)
        std::copy(&v.data[i * pf], &v.data[(i + 1) * pf], &out.data[i * f + off]);
      off += pf;
    }
    return push(std::move(out), ng, [this, parts](int id) {
      const Ten& g = grad(id);
      std::size_t f = g.dim(1), t = g.dim(0);
      std::size_t off = 0;
      for (int p : parts) {
        const Ten& v = val(p);
        std::size_t pf = v.dim(1);
        if (needs_grad(p)) {
          Ten gp(v.shape);
          for (std::size_t i = 0; i < t; ++i)
            std::copy(&g.data[i * f + off], &g.data[i * f + off + pf], &gp.data[i * pf]);
          accumulate(p, gp);
        }
        off += pf;
      }
    });
  }

  // x [T,F] + r [1,F] broadcast over rows.
  int row_broadcast_add(int x, int r) {
    const Ten& xv = val(x);
    const Ten& rv = val(r);
    if (xv.rank() != 2 || rv.rank() != 2 || rv.dim(0) != 1 || rv.dim(1) != xv.dim(1))
      throw ConfigError("row_broadcast_add: bad shapes");
    Ten out = xv;
    std::size_t t = xv.dim(0), f = xv.dim(1);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < f; ++j) out.data[i * f + j] += rv[j];
    return push(std::move(out), needs_grad(x) || needs_grad(r), [this, x, r](int id) {
      const Ten& g = grad(id);
      if (needs_grad(x)) accumulate(x, g);
      if (needs_grad(r)) {
        std::size_t t = g.dim(0), f = g.dim(1);
        Ten gr({1, f});
        for (std::size_t i = 0; i < t; ++i)
          for (std::size_t j = 0; j < f; ++j) gr[j] += g.data[i * f + j];
        accumulate(r, gr);
      }
    });
  }

  int reshape(int x, std::vector<std::size_t> shape) {
    Ten out = val(x).reshaped(shape);
    return push(std::move(out), needs_grad(x), [this, x](int id) {
      Ten g = grad(id).reshaped(val(x).shape);
      accumulate(x, g);
    });
  }

  // Mean squared error against a constant target; returns [1].
  int mse_const(int x, const Ten& target) {
    const Ten& xv = val(x);
    check_same_shape("mse", xv.shape, target.shape);
    T acc = 0;
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      T d = xv[i] - target[i];
      acc += d * d;
    }
    Ten out({1});
    out[0] = acc / static_cast<T>(xv.numel());
    Ten tgt = target;
    return push(std::move(out), needs_grad(x), [this, x, tgt](int id) {
      const Ten& g = grad(id);
      const Ten& xv = val(x);
      T s = static_cast<T>(2) * g[0] / static_cast<T>(xv.numel());
      Ten gx(xv.shape);
      for (std::size_t i = 0; i < xv.numel(); ++i) gx[i] = s * (xv[i] - tgt[i]);
      accumulate(x, gx);
    });
  }

  int sum_all(int x) {
    const Ten& xv = val(x);
    Ten out({1});
    T acc = 0;
    for (T v : xv.data) acc += v;
    out[0] = acc;
    return push(std::move(out), needs_grad(x), [this, x](int id) {
      const Ten& g = grad(id);
      Ten gx(val(x).shape);
      gx.fill(g[0]);
      accumulate(x, gx);
    });
  }

  // Multi-head attention: q_in [Tq,F], kv [Tk,F]. Weights wq..wo are [F,F],
  // biases [F]. Composed from tape primitives so the whole block is covered
  // by the same backward machinery.
  int mha(int q_in, int kv, int wq, int bq, int wk, int bk, int wv_, int bv, int wo, int bo,
          int heads) {
    std::size_t f = val(q_in).dim(1);
    if (f % heads) throw ConfigError("mha: heads must divide feature width");
    std::size_t dh = f / heads;
    int q = linear(q_in, wq, bq);
    int k = linear(kv, wk, bk);
    int v = linear(kv, wv_, bv);
    T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<int> head_outs;
    for (int h = 0; h < heads; ++h) {
      int qh = slice_cols(q, h * dh, (h + 1) * dh);
      int kh = slice_cols(k, h * dh, (h + 1) * dh);
      int vh = slice_cols(v, h * dh, (h + 1) * dh);
      int scores = scale(matmul_nt(qh, kh), inv_sqrt);
      int probs = softmax_lastdim(scores);
      head_outs.push_back(matmul(probs, vh));
    }
    int cat = heads == 1 ? head_outs[0] : concat_cols(head_outs);
    return linear(cat, wo, bo);
  }

  // Seeds d(loss)/d(loss) = seed and runs all closures in reverse order.
  void backward(int loss_id, T seed = static_cast<T>(1)) {
    if (val(loss_id).numel() != 1) throw ConfigError("backward: loss must be scalar");
    for (auto& n : nodes_)
      if (n.needs_grad && n.grad.numel() == 0) n.grad = Ten(n.value.shape);
    nodes_[loss_id].grad[0] = seed;
    for (int i = static_cast<int>(back_.size()) - 1; i >= 0; --i)
      if (back_[i].fn && nodes_[back_[i].node].needs_grad) back_[i].fn(back_[i].node);
  }

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Ten value;
    Ten grad;
    bool needs_grad = false;
  };
  struct BackOp {
    int node;
    std::function<void(int)> fn;
  };

  int push(Ten value, bool needs_grad, std::function<void(int)> fn) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    back_.push_back(BackOp{id, needs_grad ? std::move(fn) : nullptr});
    return id;
  }

  void accumulate(int id, const Ten& g) {
    if (!nodes_[id].needs_grad) return;
    Ten& dst = nodes_[id].grad;
    if (dst.numel() == 0) dst = Ten(nodes_[id].value.shape);
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
  }

  static void conv_forward(const Ten& x, const Ten& w, Ten& out, int stride, int pad) {
    std::size_t ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
    std::size_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    std::size_t ho = out.dim(1), wo = out.dim(2);
    for (std::size_t oc = 0; oc < co; ++oc)
      for (std::size_t ic = 0; ic < ci; ++ic)
        for (std::size_t ky = 0; ky < kh; ++ky)
          for (std::size_t kx = 0; kx < kw; ++kx) {
            T wv = w.data[((oc * ci + ic) * kh + ky) * kw + kx];
            if (wv == 0) continue;
            // valid output range so iy,ix stay in bounds
            long oy0 = std::max<long>(0, (pad - static_cast<long>(ky) + stride - 1) / stride);
            long oy1 = std::min<long>(ho - 1, (static_cast<long>(h) - 1 + pad - static_cast<long>(ky)) / stride);
            long ox0 = std::max<long>(0, (pad - static_cast<long>(kx) + stride - 1) / stride);
            long ox1 = std::min<long>(wo - 1, (static_cast<long>(wd) - 1 + pad - static_cast<long>(kx)) / stride);
            for (long oy = oy0; oy <= oy1; ++oy) {
              long iy = oy * stride + static_cast<long>(ky) - pad;
              const T* xrow = &x.data[(ic * h + iy) * wd];
              T* orow = &out.data[(oc * ho + oy) * wo];
              for (long ox = ox0; ox <= ox1; ++ox)
                orow[ox] += wv * xrow[ox * stride + static_cast<long>(kx) - pad];
            }
          }
  }

  static void conv_backward_data(const Ten& g, const Ten& w, Ten& gx, int stride, int pad) {
    std::size_t ci = gx.dim(0), h = gx.dim(1), wd = gx.dim(2);
    std::size_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    std::size_t ho = g.dim(1), wo = g.dim(2);
    for (std::size_t oc = 0; oc < co; ++oc)
      for (std::size_t ic = 0; ic < ci; ++ic)
        for (std::size_t ky = 0; ky < kh; ++ky)
          for (std::size_t kx = 0; kx < kw; ++kx) {
            T wv = w.data[((oc * ci + ic) * kh + ky) * kw + kx];
            if (wv == 0) continue;
            long oy0 = std::max<long>(0, (pad - static_cast<long>(ky) + stride - 1) / stride);
            long oy1 = std::min<long>(ho - 1, (static_cast<long>(h) - 1 + pad - static_cast<long>(ky)) / stride);
            long ox0 = std::max<long>(0, (pad - static_cast<long>(kx) + stride - 1) / stride);
            long ox1 = std::min<long>(wo - 1, (static_cast<long>(wd) - 1 + pad - static_cast<long>(kx)) / stride);
            for (long oy = oy0; oy <= oy1; ++oy) {
              long iy = oy * stride + static_cast<long>(ky) - pad;
              T* gxrow = &gx.data[(ic * h + iy) * wd];
              const T* grow = &g.data[(oc * ho + oy) * wo];
              for (long ox = ox0; ox <= ox1; ++ox)
                gxrow[ox * stride + static_cast<long>(kx) - pad] += wv * grow[ox];
            }
          }
  }

  static void conv_backward_weights(const Ten& g, const Ten& x, Ten& gw, int stride, int pad) {
    std::size_t ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
    std::size_t co = gw.dim(0), kh = gw.dim(2), kw = gw.dim(3);
    std::size_t ho = g.dim(1), wo = g.dim(2);
    for (std::size_t oc = 0; oc < co; ++oc)
      for (std::size_t ic = 0; ic < ci; ++ic)
        for (std::size_t ky = 0; ky < kh; ++ky)
          for (std::size_t kx = 0; kx < kw; ++kx) {
            long oy0 = std::max<long>(0, (pad - static_cast<long>(ky) + stride - 1) / stride);
            long oy1 = std::min<long>(ho - 1, (static_cast<long>(h) - 1 + pad - static_cast<long>(ky)) / stride);
            long ox0 = std::max<long>(0, (pad - static_cast<long>(kx) + stride - 1) / stride);
            long ox1 = std::min<long>(wo - 1, (static_cast<long>(wd) - 1 + pad - static_cast<long>(kx)) / stride);
            T acc = 0;
            for (long oy = oy0; oy <= oy1; ++oy) {
              long iy = oy * stride + static_cast<long>(ky) - pad;
              const T* xrow = &x.data[(ic * h + iy) * wd];
              const T* grow = &g.data[(oc * ho + oy) * wo];
              for (long ox = ox0; ox <= ox1; ++ox)
                acc += grow[ox] * xrow[ox * stride + static_cast<long>(kx) - pad];
            }
            gw.data[((oc * ci + ic) * kh + ky) * kw + kx] += acc;
          }
  }

  std::vector<Node> nodes_;
  std::vector<BackOp> back_;
};

// Sinusoidal embedding of an integer position: [1,F] with interleaved
// sin/cos over geometrically spaced frequencies.
template <typename T>
Tensor<T> sinusoidal_embed(double position, std::size_t f) {
  Tensor<T> out({1, f});
  std::size_t half = f / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out.data[i] = static_cast<T>(std::sin(position * freq));
    out.data[half + i] = static_cast<T>(std::cos(position * freq));
  }
  if (f % 2) out.data[f - 1] = 0;
  return out;
}

}  // namespace gaudp::nn
