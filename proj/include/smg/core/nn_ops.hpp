#pragma once

#include <Eigen/Core>

#include "smg/core/graph.hpp"

namespace smg {

namespace detail {

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRM = Eigen::Map<MatRM<S>>;
template <typename S>
using CMapRM = Eigen::Map<const MatRM<S>>;

// im2col over the whole batch: output K x (B*OH*OW), column-major storage.
template <typename S>
inline void im2col(const Tensor<S>& x, int kh, int kw, int stride, int pad, int oh, int ow,
                   std::vector<S>& cols) {
  const int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const std::size_t K = static_cast<std::size_t>(C) * kh * kw;
  const std::size_t N = static_cast<std::size_t>(B) * oh * ow;
  cols.assign(K * N, S(0));
  const S* xd = x.data.data();
  std::size_t n = 0;
  for (int b = 0; b < B; ++b) {
    const S* xb = xd + static_cast<std::size_t>(b) * C * H * W;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy0 = oy * stride - pad;
      for (int ox = 0; ox < ow; ++ox, ++n) {
        const int ix0 = ox * stride - pad;
        S* col = cols.data() + n * K;
        std::size_t k = 0;
        for (int c = 0; c < C; ++c) {
          const S* xc = xb + static_cast<std::size_t>(c) * H * W;
          for (int dy = 0; dy < kh; ++dy) {
            const int iy = iy0 + dy;
            if (iy < 0 || iy >= H) {
              k += static_cast<std::size_t>(kw);
              continue;
            }
            const S* xrow = xc + static_cast<std::size_t>(iy) * W;
            for (int dx = 0; dx < kw; ++dx, ++k) {
              const int ix = ix0 + dx;
              if (ix >= 0 && ix < W) col[k] = xrow[ix];
            }
          }
        }
      }
    }
  }
}

template <typename S>
inline void col2im_add(const std::vector<S>& cols, int kh, int kw, int stride, int pad, int oh,
                       int ow, Tensor<S>& dx) {
  const int B = dx.shape[0], C = dx.shape[1], H = dx.shape[2], W = dx.shape[3];
  const std::size_t K = static_cast<std::size_t>(C) * kh * kw;
  S* xd = dx.data.data();
  std::size_t n = 0;
  for (int b = 0; b < B; ++b) {
    S* xb = xd + static_cast<std::size_t>(b) * C * H * W;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy0 = oy * stride - pad;
      for (int ox = 0; ox < ow; ++ox, ++n) {
        const int ix0 = ox * stride - pad;
        const S* col = cols.data() + n * K;
        std::size_t k = 0;
        for (int c = 0; c < C; ++c) {
          S* xc = xb + static_cast<std::size_t>(c) * H * W;
          for (int dy = 0; dy < kh; ++dy) {
            const int iy = iy0 + dy;
            if (iy < 0 || iy >= H) {
              k += static_cast<std::size_t>(kw);
              continue;
            }
            S* xrow = xc + static_cast<std::size_t>(iy) * W;
            for (int dx_ = 0; dx_ < kw; ++dx_, ++k) {
              const int ix = ix0 + dx_;
              if (ix >= 0 && ix < W) xrow[ix] += col[k];
            }
          }
        }
      }
    }
  }
}

} // namespace detail

// y = x @ w^T + b, x: [B,I], w: [O,I], b: [O] -> y: [B,O]
template <typename S>
inline Var<S> linear(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
  const auto& xs = x.val().shape;
  const auto& ws = w.val().shape;
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
    throw InputError("linear: shape mismatch " + x.val().shape_str() + " vs " + w.val().shape_str());
  if (b.val().numel() != static_cast<std::size_t>(ws[0])) throw InputError("linear: bias size");
  const int B = xs[0], I = xs[1], O = ws[0];
  Tensor<S> out({B, O});
  {
    detail::CMapRM<S> X(x.val().data.data(), B, I);
    detail::CMapRM<S> W(w.val().data.data(), O, I);
    detail::MapRM<S> Y(out.data.data(), B, O);
    Y.noalias() = X * W.transpose();
    for (int r = 0; r < B; ++r)
      for (int c = 0; c < O; ++c) out.at2(r, c) += b.val().data[static_cast<std::size_t>(c)];
  }
  return Var<S>(detail::make_node<S>(std::move(out), {x.node(), w.node(), b.node()},
                                     [B, I, O](Node<S>& self) {
    auto& x = self.parents[0];
    auto& w = self.parents[1];
    auto& b = self.parents[2];
    detail::CMapRM<S> dY(self.grad.data.data(), B, O);
    if (x->requires_grad) {
      detail::CMapRM<S> W(w->val.data.data(), O, I);
      detail::MapRM<S> dX(x->grad.data.data(), B, I);
      dX.noalias() += dY * W;
    }
    if (w->requires_grad) {
      detail::CMapRM<S> X(x->val.data.data(), B, I);
      detail::MapRM<S> dW(w->grad.data.data(), O, I);
      dW.noalias() += dY.transpose() * X;
    }
    if (b->requires_grad) {
      for (int r = 0; r < B; ++r)
        for (int c = 0; c < O; ++c)
          b->grad.data[static_cast<std::size_t>(c)] += self.grad.at2(r, c);
    }
  }));
}

// x: [B,C,H,W], w: [OC,C,kh,kw], b: [OC]
template <typename S>
inline Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& b, int stride, int pad) {
  const auto& xs = x.val().shape;
  const auto& ws = w.val().shape;
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1])
    throw InputError("conv2d: shape mismatch " + x.val().shape_str() + " vs " + w.val().shape_str());
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int OC = ws[0], kh = ws[2], kw = ws[3];
  const int OH = (H + 2 * pad - kh) / stride + 1;
  const int OW = (W + 2 * pad - kw) / stride + 1;
  if (OH <= 0 || OW <= 0) throw InputError("conv2d: output would be empty");
  const std::size_t K = static_cast<std::size_t>(C) * kh * kw;
  const std::size_t N = static_cast<std::size_t>(B) * OH * OW;

  std::vector<S> cols;
  detail::im2col(x.val(), kh, kw, stride, pad, OH, OW, cols);
  // Y (OC x N) column-major == (N x OC) row-major transposed; compute row-major
  // N x OC = cols^T (N x K) * w^T (K x OC), then scatter into [B,OC,OH,OW].
  Tensor<S> out({B, OC, OH, OW});
  {
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> Cm(
        cols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
    detail::CMapRM<S> Wm(w.val().data.data(), OC, static_cast<int>(K));
    detail::MatRM<S> Yt(static_cast<Eigen::Index>(N), OC); // [b*oh*ow, oc]
    Yt.noalias() = Cm.transpose() * Wm.transpose();
    const std::size_t HW = static_cast<std::size_t>(OH) * OW;
    for (int bi = 0; bi < B; ++bi)
      for (std::size_t p = 0; p < HW; ++p) {
        const S* row = Yt.data() + (static_cast<std::size_t>(bi) * HW + p) * OC;
        for (int oc = 0; oc < OC; ++oc)
          out.data[(static_cast<std::size_t>(bi) * OC + oc) * HW + p] =
              row[oc] + b.val().data[static_cast<std::size_t>(oc)];
      }
  }
  const int pad_ = pad, stride_ = stride;
  return Var<S>(detail::make_node<S>(std::move(out), {x.node(), w.node(), b.node()},
                                     [B, C, OC, OH, OW, kh, kw, stride_, pad_, K, N](Node<S>& self) {
    auto& x = self.parents[0];
    auto& w = self.parents[1];
    auto& b = self.parents[2];
    const std::size_t HW = static_cast<std::size_t>(OH) * OW;
    // gather dY into row-major N x OC
    detail::MatRM<S> dYt(static_cast<Eigen::Index>(N), OC);
    for (int bi = 0; bi < B; ++bi)
      for (std::size_t p = 0; p < HW; ++p) {
        S* row = dYt.data() + (static_cast<std::size_t>(bi) * HW + p) * OC;
        for (int oc = 0; oc < OC; ++oc)
          row[oc] = self.grad.data[(static_cast<std::size_t>(bi) * OC + oc) * HW + p];
      }
    if (b->requires_grad) {
      for (std::size_t n = 0; n < N; ++n)
        for (int oc = 0; oc < OC; ++oc) b->grad.data[static_cast<std::size_t>(oc)] += dYt(static_cast<Eigen::Index>(n), oc);
    }
    if (w->requires_grad) {
      std::vector<S> cols;
      detail::im2col(x->val, kh, kw, stride_, pad_, OH, OW, cols);
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> Cm(
          cols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
      detail::MapRM<S> dW(w->grad.data.data(), OC, static_cast<int>(K));
      dW.noalias() += (Cm * dYt).transpose();
    }
    if (x->requires_grad) {
      std::vector<S> dcols(K * N);
      Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> dCm(
          dcols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
      detail::CMapRM<S> Wm(w->val.data.data(), OC, static_cast<int>(K));
      dCm.noalias() = Wm.transpose() * dYt.transpose();
      detail::col2im_add(dcols, kh, kw, stride_, pad_, OH, OW, x->grad);
    }
    (void)C;
  }));
}

// nearest-neighbour 2x upsampling
template <typename S>
inline Var<S> upsample2x(const Var<S>& x) {
  const auto& xs = x.val().shape;
  if (xs.size() != 4) throw InputError("upsample2x: rank-4 input required");
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  Tensor<S> out({B, C, 2 * H, 2 * W});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const S* src = x.val().data.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
      S* dst = out.data.data() + (static_cast<std::size_t>(b) * C + c) * 4 * H * W;
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          const S v = src[static_cast<std::size_t>(y) * W + xx];
          S* d0 = dst + (static_cast<std::size_t>(2 * y) * 2 * W + 2 * xx);
          d0[0] = v;
          d0[1] = v;
          d0[2 * W] = v;
          d0[2 * W + 1] = v;
        }
    }
  return Var<S>(detail::make_node<S>(std::move(out), {x.node()}, [B, C, H, W](Node<S>& self) {
    auto& x = self.parents[0];
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        S* dst = x->grad.data.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
        const S* g = self.grad.data.data() + (static_cast<std::size_t>(b) * C + c) * 4 * H * W;
        for (int y = 0; y < H; ++y)
          for (int xx = 0; xx < W; ++xx) {
            const S* g0 = g + (static_cast<std::size_t>(2 * y) * 2 * W + 2 * xx);
            dst[static_cast<std::size_t>(y) * W + xx] += g0[0] + g0[1] + g0[2 * W] + g0[2 * W + 1];
          }
      }
  }));
}

template <typename S>
inline Var<S> flatten2(const Var<S>& x) {
  const auto& xs = x.val().shape;
  if (xs.empty()) throw InputError("flatten2: empty shape");
  int rest = 1;
  for (std::size_t i = 1; i < xs.size(); ++i) rest *= xs[i];
  Tensor<S> out = x.val().reshaped({xs[0], rest});
  return Var<S>(detail::make_node<S>(std::move(out), {x.node()}, [](Node<S>& self) {
    auto& x = self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) x->grad.data[i] += self.grad.data[i];
  }));
}

template <typename S>
inline Var<S> concat_cols(const Var<S>& a, const Var<S>& b) {
  const auto& as = a.val().shape;
  const auto& bs = b.val().shape;
  if (as.size() != 2 || bs.size() != 2 || as[0] != bs[0]) throw InputError("concat_cols: shapes");
  const int B = as[0], I = as[1], J = bs[1];
  Tensor<S> out({B, I + J});
  for (int r = 0; r < B; ++r) {
    for (int c = 0; c < I; ++c) out.at2(r, c) = a.val().at2(r, c);
    for (int c = 0; c < J; ++c) out.at2(r, I + c) = b.val().at2(r, c);
  }
  return Var<S>(detail::make_node<S>(std::move(out), {a.node(), b.node()}, [B, I, J](Node<S>& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    for (int r = 0; r < B; ++r) {
      if (a->requires_grad)
        for (int c = 0; c < I; ++c) a->grad.at2(r, c) += self.grad.at2(r, c);
      if (b->requires_grad)
        for (int c = 0; c < J; ++c) b->grad.at2(r, c) += self.grad.at2(r, I + c);
    }
  }));
}

template <typename S>
inline Var<S> slice_cols(const Var<S>& x, int c0, int c1) {
  const auto& xs = x.val().shape;
  if (xs.size() != 2 || c0 < 0 || c1 > xs[1] || c0 >= c1) throw InputError("slice_cols: range");
  const int B = xs[0], N = xs[1], M = c1 - c0;
  Tensor<S> out({B, M});
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < M; ++c) out.at2(r, c) = x.val().at2(r, c0 + c);
  return Var<S>(detail::make_node<S>(std::move(out), {x.node()}, [B, M, c0](Node<S>& self) {
    auto& x = self.parents[0];
    for (int r = 0; r < B; ++r)
      for (int c = 0; c < M; ++c) x->grad.at2(r, c0 + c) += self.grad.at2(r, c);
  }));
}

// concat along channel dim of [B,C,H,W] tensors
template <typename S>
inline Var<S> concat_channels(const std::vector<Var<S>>& xs) {
  if (xs.empty()) throw InputError("concat_channels: empty");
  const int B = xs[0].val().shape[0], H = xs[0].val().shape[2], W = xs[0].val().shape[3];
  int C = 0;
  for (const auto& x : xs) {
    if (x.val().rank() != 4 || x.val().shape[0] != B || x.val().shape[2] != H || x.val().shape[3] != W)
      throw InputError("concat_channels: incompatible shapes");
    C += x.val().shape[1];
  }
  Tensor<S> out({B, C, H, W});
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  std::vector<std::shared_ptr<Node<S>>> parents;
  std::vector<int> chans;
  for (const auto& x : xs) {
    parents.push_back(x.node());
    chans.push_back(x.val().shape[1]);
  }
  for (int b = 0; b < B; ++b) {
    std::size_t coff = 0;
    for (const auto& x : xs) {
      const int ci = x.val().shape[1];
      const S* src = x.val().data.data() + static_cast<std::size_t>(b) * ci * HW;
      S* dst = out.data.data() + (static_cast<std::size_t>(b) * C + coff) * HW;
      std::copy(src, src + static_cast<std::size_t>(ci) * HW, dst);
      coff += static_cast<std::size_t>(ci);
    }
  }
  return Var<S>(detail::make_node<S>(std::move(out), std::move(parents), [B, C, HW, chans](Node<S>& self) {
    for (int b = 0; b < B; ++b) {
      std::size_t coff = 0;
      for (std::size_t k = 0; k < chans.size(); ++k) {
        auto& p = self.parents[k];
        const int ci = chans[k];
        if (p->requires_grad) {
          const S* g = self.grad.data.data() + (static_cast<std::size_t>(b) * C + coff) * HW;
          S* dst = p->grad.data.data() + static_cast<std::size_t>(b) * ci * HW;
          for (std::size_t i = 0; i < static_cast<std::size_t>(ci) * HW; ++i) dst[i] += g[i];
        }
        coff += static_cast<std::size_t>(ci);
      }
    }
  }));
}

template <typename S>
inline Var<S> slice_channels(const Var<S>& x, int c0, int c1) {
  const auto& xs = x.val().shape;
  if (xs.size() != 4 || c0 < 0 || c1 > xs[1] || c0 >= c1) throw InputError("slice_channels: range");
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3], M = c1 - c0;
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  Tensor<S> out({B, M, H, W});
  for (int b = 0; b < B; ++b) {
    const S* src = x.val().data.data() + (static_cast<std::size_t>(b) * C + c0) * HW;
    S* dst = out.data.data() + static_cast<std::size_t>(b) * M * HW;
    std::copy(src, src + static_cast<std::size_t>(M) * HW, dst);
  }
  return Var<S>(detail::make_node<S>(std::move(out), {x.node()}, [B, C, M, HW, c0](Node<S>& self) {
    auto& x = self.parents[0];
    for (int b = 0; b < B; ++b) {
      const S* g = self.grad.data.data() + static_cast<std::size_t>(b) * M * HW;
      S* dst = x->grad.data.data() + (static_cast<std::size_t>(b) * C + c0) * HW;
      for (std::size_t i = 0; i < static_cast<std::size_t>(M) * HW; ++i) dst[i] += g[i];
    }
  }));
}

// Per-frame mask product: x [B,3F,H,W] (RGB frames), m [B,F,H,W] ->
// y[b,3f+c] = x[b,3f+c] * m[b,f].
template <typename S>
inline Var<S> mul_frame_mask(const Var<S>& x, const Var<S>& m) {
  const auto& xs = x.val().shape;
  const auto& ms = m.val().shape;
  if (xs.size() != 4 || ms.size() != 4 || xs[0] != ms[0] || xs[2] != ms[2] || xs[3] != ms[3] ||
      xs[1] != 3 * ms[1])
    throw InputError("mul_frame_mask: shapes " + x.val().shape_str() + " vs " + m.val().shape_str());
  const int B = xs[0], F = ms[1], H = xs[2], W = xs[3];
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  Tensor<S> out({B, 3 * F, H, W});
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f) {
      const S* md = m.val().data.data() + (static_cast<std::size_t>(b) * F + f) * HW;
      for (int c = 0; c < 3; ++c) {
        const std::size_t off = (static_cast<std::size_t>(b) * 3 * F + 3 * f + c) * HW;
        const S* xd = x.val().data.data() + off;
        S* yd = out.data.data() + off;
        for (std::size_t i = 0; i < HW; ++i) yd[i] = xd[i] * md[i];
      }
    }
  return Var<S>(detail::make_node<S>(std::move(out), {x.node(), m.node()}, [B, F, HW](Node<S>& self) {
    auto& x = self.parents[0];
    auto& m = self.parents[1];
    for (int b = 0; b < B; ++b)
      for (int f = 0; f < F; ++f) {
        const std::size_t moff = (static_cast<std::size_t>(b) * F + f) * HW;
        for (int c = 0; c < 3; ++c) {
          const std::size_t off = (static_cast<std::size_t>(b) * 3 * F + 3 * f + c) * HW;
          const S* g = self.grad.data.data() + off;
          if (x->requires_grad) {
            const S* md = m->val.data.data() + moff;
            S* dx = x->grad.data.data() + off;
            for (std::size_t i = 0; i < HW; ++i) dx[i] += g[i] * md[i];
          }
          if (m->requires_grad) {
            const S* xd = x->val.data.data() + off;
            S* dm = m->grad.data.data() + moff;
            for (std::size_t i = 0; i < HW; ++i) dm[i] += g[i] * xd[i];
          }
        }
      }
  }));
}

// per-row sum: [B,N] -> [B,1]
template <typename S>
inline Var<S> row_sum(const Var<S>& x) {
  const auto& xs = x.val().shape;
  if (xs.size() != 2) throw InputError("row_sum: rank-2 input required");
  const int B = xs[0], N = xs[1];
  Tensor<S> out({B, 1});
  for (int r = 0; r < B; ++r) {
    S acc = 0;
    for (int c = 0; c < N; ++c) acc += x.val().at2(r, c);
    out.at2(r, 0) = acc;
  }
  return Var<S>(detail::make_node<S>(std::move(out), {x.node()}, [B, N](Node<S>& self) {
    auto& x = self.parents[0];
    for (int r = 0; r < B; ++r) {
      const S g = self.grad.at2(r, 0);
      for (int c = 0; c < N; ++c) x->grad.at2(r, c) += g;
    }
  }));
}

// broadcast [B,1] across N columns
template <typename S>
inline Var<S> broadcast_cols(const Var<S>& x, int n) {
  const auto& xs = x.val().shape;
  if (xs.size() != 2 || xs[1] != 1) throw InputError("broadcast_cols: [B,1] input required");
  const int B = xs[0];
  Tensor<S> out({B, n});
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < n; ++c) out.at2(r, c) = x.val().at2(r, 0);
  return Var<S>(detail::make_node<S>(std::move(out), {x.node()}, [B, n](Node<S>& self) {
    auto& x = self.parents[0];
    for (int r = 0; r < B; ++r) {
      S acc = 0;
      for (int c = 0; c < n; ++c) acc += self.grad.at2(r, c);
      x->grad.at2(r, 0) += acc;
    }
  }));
}

} // namespace smg
