#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "smg/core/errors.hpp"
#include "smg/core/graph.hpp"
#include "smg/core/nn_ops.hpp"
#include "smg/core/rng.hpp"
#include "smg/core/tensor.hpp"

namespace smg::augment {

enum class AugKind { overlay, attribution };

inline const char* to_string(AugKind k) { return k == AugKind::overlay ? "overlay" : "attribution"; }

enum class AttributionSource { raw_observation, predicted_foreground };

enum class CorpusSource { procedural, external_folder };

struct DistractorCorpus {
  int image_size = 0;
  CorpusSource source = CorpusSource::procedural;
  std::uint64_t seed = 0;
  // each image is planar RGB bytes, 3 * S * S
  std::vector<std::vector<std::uint8_t>> images;

  std::size_t count() const { return images.size(); }

  template <typename S>
  Tensor<S> image_tensor(std::size_t idx) const {
    Tensor<S> t({3, image_size, image_size});
    const auto& im = images[idx];
    for (std::size_t i = 0; i < im.size(); ++i) t.data[i] = static_cast<S>(im[i]) / S(255);
    return t;
  }

  double mean_pixel() const {
    double acc = 0;
    std::size_t n = 0;
    for (const auto& im : images) {
      for (auto b : im) acc += b / 255.0;
      n += im.size();
    }
    return acc / static_cast<double>(n);
  }
};

struct AugmentPolicy {
  std::set<AugKind> kinds = {AugKind::overlay, AugKind::attribution};
  double overlay_alpha = 0.5;
  AttributionSource attribution_source = AttributionSource::raw_observation;
  int attrib_frame_shift_px = 0; // per-frame horizontal shift of epsilon under attribution

  void validate() const {
    if (kinds.empty()) throw ConfigError("aug.kinds must be nonempty");
    if (!(overlay_alpha > 0.0 && overlay_alpha < 1.0))
      throw ConfigError("aug.overlay_alpha must lie in (0,1)");
    if (attrib_frame_shift_px < 0) throw ConfigError("aug.attrib_frame_shift_px must be >= 0");
  }
};

namespace detail {

// filled triangle rasterization via sign tests
inline void fill_triangle(std::vector<double>& plane, int S, double x0, double y0, double x1,
                          double y1, double x2, double y2, double value) {
  auto edge = [](double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  };
  const int xmin = std::max(0, static_cast<int>(std::floor(std::min({x0, x1, x2}))));
  const int xmax = std::min(S - 1, static_cast<int>(std::ceil(std::max({x0, x1, x2}))));
  const int ymin = std::max(0, static_cast<int>(std::floor(std::min({y0, y1, y2}))));
  const int ymax = std::min(S - 1, static_cast<int>(std::ceil(std::max({y0, y1, y2}))));
  for (int y = ymin; y <= ymax; ++y)
    for (int x = xmin; x <= xmax; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double e0 = edge(x0, y0, x1, y1, px, py);
      const double e1 = edge(x1, y1, x2, y2, px, py);
      const double e2 = edge(x2, y2, x0, y0, px, py);
      if ((e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0))
        plane[static_cast<std::size_t>(y) * S + x] = value;
    }
}

} // namespace detail

// Hermetic distractor source: colored gradients with random filled polygons
// plus coarse value noise.
inline DistractorCorpus procedural_corpus(std::uint64_t seed, int n, int image_size) {
  if (n < 16) throw ConfigError("aug.corpus_size must be >= 16");
  if (image_size < 8) throw ConfigError("corpus image_size too small");
  DistractorCorpus corpus;
  corpus.image_size = image_size;
  corpus.seed = seed;
  corpus.source = CorpusSource::procedural;
  Rng rng = named_stream(seed, "augment/corpus");
  const int S = image_size;
  for (int i = 0; i < n; ++i) {
    std::vector<std::vector<double>> planes(3, std::vector<double>(static_cast<std::size_t>(S) * S));
    // gradient between two random colors along a random direction
    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
      c0[c] = 0.1 + 0.8 * rng.u01();
      c1[c] = 0.1 + 0.8 * rng.u01();
    }
    const double ang = rng.u01() * 6.283185307179586;
    const double dx = std::cos(ang), dy = std::sin(ang);
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        double tpos = ((x + 0.5) * dx + (y + 0.5) * dy) / S * 0.5 + 0.5;
        tpos = std::clamp(tpos, 0.0, 1.0);
        for (int c = 0; c < 3; ++c)
          planes[c][static_cast<std::size_t>(y) * S + x] = c0[c] + (c1[c] - c0[c]) * tpos;
      }
    // random triangles
    const int ntri = 2 + static_cast<int>(rng.index(4));
    for (int k = 0; k < ntri; ++k) {
      double xs[3], ys[3], col[3];
      for (int v = 0; v < 3; ++v) {
        xs[v] = rng.u01() * S;
        ys[v] = rng.u01() * S;
      }
      for (int c = 0; c < 3; ++c) col[c] = 0.05 + 0.9 * rng.u01();
      for (int c = 0; c < 3; ++c)
        detail::fill_triangle(planes[c], S, xs[0], ys[0], xs[1], ys[1], xs[2], ys[2], col[c]);
    }
    // coarse noise blended on top
    const std::uint64_t noise_seed = rng.next();
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        const std::uint64_t key =
            Rng::splitmix(noise_seed ^ (static_cast<std::uint64_t>(y / 4) * 131071u + (x / 4)));
        const double nz = static_cast<double>(key >> 11) * 0x1.0p-53;
        for (int c = 0; c < 3; ++c) {
          auto& v = planes[c][static_cast<std::size_t>(y) * S + x];
          v = std::clamp(0.85 * v + 0.15 * nz, 0.0, 1.0);
        }
      }
    std::vector<std::uint8_t> img(static_cast<std::size_t>(3) * S * S);
    for (int c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < static_cast<std::size_t>(S) * S; ++p)
        img[static_cast<std::size_t>(c) * S * S + p] = quantize_u8(planes[c][p]);
    corpus.images.push_back(std::move(img));
  }
  return corpus;
}

// Load an external folder of PPM images (all must match image_size).
inline DistractorCorpus folder_corpus(const std::vector<std::string>& paths, int image_size) {
  if (paths.size() < 16) throw ConfigError("distractor folder must contain at least 16 images");
  DistractorCorpus corpus;
  corpus.image_size = image_size;
  corpus.source = CorpusSource::external_folder;
  for (const auto& p : paths) {
    Image img = read_ppm(p);
    if (img.width != image_size || img.height != image_size)
      throw InputError("distractor image size mismatch: " + p);
    corpus.images.push_back(img.pixels);
  }
  return corpus;
}

namespace detail {

// tile a single RGB image across the frame stack, optional per-frame x shift
template <typename S>
inline Tensor<S> tile_epsilon(const Tensor<S>& eps, int frames, int shift_px) {
  const int H = eps.shape[1], W = eps.shape[2];
  Tensor<S> out({frames * 3, H, W});
  for (int f = 0; f < frames; ++f) {
    const int sh = (shift_px * f) % W;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          out.at3(f * 3 + c, y, x) = eps.at3(c, y, (x + sh) % W);
  }
  return out;
}

} // namespace detail

// tau(o) = (1-alpha) * o + alpha * eps, eps tiled across the frame stack
template <typename S>
inline Tensor<S> overlay_augment(const Tensor<S>& obs, const Tensor<S>& eps, double alpha) {
  if (obs.rank() != 3 || eps.rank() != 3 || eps.shape[0] != 3 || obs.shape[1] != eps.shape[1] ||
      obs.shape[2] != eps.shape[2] || obs.shape[0] % 3 != 0)
    throw InputError("overlay_augment: shape mismatch " + obs.shape_str() + " vs " + eps.shape_str());
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("overlay_augment: alpha must lie in (0,1)");
  const int frames = obs.shape[0] / 3;
  Tensor<S> tiled = detail::tile_epsilon(eps, frames, 0);
  Tensor<S> out = obs;
  const S a = static_cast<S>(alpha);
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data[i] = (S(1) - a) * obs.data[i] + a * tiled.data[i];
  return out;
}

// tau_attrib(o) = o . M + eps . (1 - M); mask has one channel per frame
template <typename S>
inline Tensor<S> attribution_augment(const Tensor<S>& obs, const Tensor<S>& mask,
                                     const Tensor<S>& eps, int frame_shift_px = 0) {
  if (obs.rank() != 3 || obs.shape[0] % 3 != 0)
    throw InputError("attribution_augment: bad observation shape " + obs.shape_str());
  const int frames = obs.shape[0] / 3;
  if (mask.rank() != 3 || mask.shape[0] != frames || mask.shape[1] != obs.shape[1] ||
      mask.shape[2] != obs.shape[2])
    throw InputError("attribution_augment: mask shape mismatch " + mask.shape_str());
  if (eps.rank() != 3 || eps.shape[0] != 3 || eps.shape[1] != obs.shape[1] ||
      eps.shape[2] != obs.shape[2])
    throw InputError("attribution_augment: epsilon shape mismatch " + eps.shape_str());
  for (S v : mask.data)
    if (!(v >= S(0) && v <= S(1))) throw InputError("attribution_augment: mask outside [0,1]");
  Tensor<S> tiled = detail::tile_epsilon(eps, frames, frame_shift_px);
  Tensor<S> out = obs;
  const int H = obs.shape[1], W = obs.shape[2];
  for (int f = 0; f < frames; ++f)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const S m = mask.at3(f, y, x);
          out.at3(f * 3 + c, y, x) =
              obs.at3(f * 3 + c, y, x) * m + tiled.at3(f * 3 + c, y, x) * (S(1) - m);
        }
  return out;
}

// Differentiable form over graph variables: gradients flow through o, M and eps.
// Batched: obs [B,3F,H,W], mask [B,F,H,W], eps_tiled [B,3F,H,W].
template <typename S>
inline Var<S> attribution_augment_var(const Var<S>& obs, const Var<S>& mask, const Var<S>& eps_tiled) {
  return add(mul_frame_mask(obs, mask), mul_frame_mask(eps_tiled, one_minus(mask)));
}

template <typename S>
struct AugmentBatch {
  Tensor<S> aug_obs;            // [B, 3F, H, W]
  Tensor<S> eps_used;           // [B, 3, H, W] (per-sample distractor)
  std::vector<AugKind> kinds;   // per sample
};

// Per-sample hybrid augmentation. Masks may be empty when attribution is not
// among the requested kinds.
template <typename S>
inline AugmentBatch<S> hybrid_augment(const Tensor<S>& obs_batch, const Tensor<S>& mask_batch,
                                      const AugmentPolicy& policy, const DistractorCorpus& corpus,
                                      Rng& rng) {
  policy.validate();
  if (obs_batch.rank() != 4) throw InputError("hybrid_augment: obs batch must be rank 4");
  const int B = obs_batch.shape[0], C = obs_batch.shape[1], H = obs_batch.shape[2],
            W = obs_batch.shape[3];
  const int frames = C / 3;
  const bool wants_attrib = policy.kinds.count(AugKind::attribution) > 0;
  if (wants_attrib &&
      (mask_batch.numel() == 0 || mask_batch.rank() != 4 || mask_batch.shape[0] != B ||
       mask_batch.shape[1] != frames))
    throw InputError("hybrid_augment: attribution requested without masks");
  if (corpus.count() == 0) throw InputError("hybrid_augment: empty distractor corpus");
  if (corpus.image_size != W) throw InputError("hybrid_augment: corpus image size mismatch");

  AugmentBatch<S> out;
  out.aug_obs = Tensor<S>({B, C, H, W});
  out.eps_used = Tensor<S>({B, 3, H, W});
  out.kinds.reserve(static_cast<std::size_t>(B));
  std::vector<AugKind> kinds(policy.kinds.begin(), policy.kinds.end());

  const std::size_t obs_stride = static_cast<std::size_t>(C) * H * W;
  const std::size_t eps_stride = static_cast<std::size_t>(3) * H * W;
  for (int b = 0; b < B; ++b) {
    AugKind kind = kinds.size() == 1 ? kinds[0] : kinds[rng.index(kinds.size())];
    Tensor<S> eps = corpus.template image_tensor<S>(rng.index(corpus.count()));
    Tensor<S> o({C, H, W});
    std::copy(obs_batch.data.begin() + static_cast<std::ptrdiff_t>(b * obs_stride),
              obs_batch.data.begin() + static_cast<std::ptrdiff_t>((b + 1) * obs_stride),
              o.data.begin());
    Tensor<S> aug;
    if (kind == AugKind::overlay) {
      aug = overlay_augment(o, eps, policy.overlay_alpha);
    } else {
      Tensor<S> m({frames, H, W});
      std::copy(mask_batch.data.begin() + static_cast<std::ptrdiff_t>(b) * frames * H * W,
                mask_batch.data.begin() + static_cast<std::ptrdiff_t>(b + 1) * frames * H * W,
                m.data.begin());
      aug = attribution_augment(o, m, eps, policy.attrib_frame_shift_px);
    }
    std::copy(aug.data.begin(), aug.data.end(),
              out.aug_obs.data.begin() + static_cast<std::ptrdiff_t>(b * obs_stride));
    std::copy(eps.data.begin(), eps.data.end(),
              out.eps_used.data.begin() + static_cast<std::ptrdiff_t>(b * eps_stride));
    out.kinds.push_back(kind);
  }
  return out;
}

// Epsilon batch tiled to observation shape [B,3F,H,W]; target of the
// background reconstruction objective.
template <typename S>
inline Tensor<S> tile_eps_batch(const Tensor<S>& eps_batch, int frames, int shift_px = 0) {
  const int B = eps_batch.shape[0], H = eps_batch.shape[2], W = eps_batch.shape[3];
  Tensor<S> out({B, frames * 3, H, W});
  for (int b = 0; b < B; ++b) {
    Tensor<S> one({3, H, W});
    std::copy(eps_batch.data.begin() + static_cast<std::ptrdiff_t>(b) * 3 * H * W,
              eps_batch.data.begin() + static_cast<std::ptrdiff_t>(b + 1) * 3 * H * W,
              one.data.begin());
    Tensor<S> tiled = detail::tile_epsilon(one, frames, shift_px);
    std::copy(tiled.data.begin(), tiled.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(b) * frames * 3 * H * W);
  }
  return out;
}

} // namespace smg::augment
