#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "smg/core/errors.hpp"
#include "smg/core/image.hpp"
#include "smg/core/rng.hpp"
#include "smg/core/tensor.hpp"

namespace smg::envgen {

enum class ShiftSetting { train, color_easy, color_hard, video_easy, video_hard };

inline const char* to_string(ShiftSetting s) {
  switch (s) {
    case ShiftSetting::train: return "train";
    case ShiftSetting::color_easy: return "color_easy";
    case ShiftSetting::color_hard: return "color_hard";
    case ShiftSetting::video_easy: return "video_easy";
    case ShiftSetting::video_hard: return "video_hard";
  }
  return "?";
}

inline ShiftSetting shift_setting_from_string(const std::string& s) {
  if (s == "train") return ShiftSetting::train;
  if (s == "color_easy") return ShiftSetting::color_easy;
  if (s == "color_hard") return ShiftSetting::color_hard;
  if (s == "video_easy") return ShiftSetting::video_easy;
  if (s == "video_hard") return ShiftSetting::video_hard;
  throw ConfigError("env.shift_setting: unknown value '" + s + "'");
}

inline const std::array<ShiftSetting, 5>& all_settings() {
  static const std::array<ShiftSetting, 5> a = {ShiftSetting::train, ShiftSetting::color_easy,
                                                ShiftSetting::color_hard, ShiftSetting::video_easy,
                                                ShiftSetting::video_hard};
  return a;
}

struct EnvSpec {
  // workspace is the unit square; positions and radii are fractions of it
  double sprite_radius = 0.10;
  double goal_radius = 0.08;
  double step_scale = 0.05;
  int episode_len = 200;   // physics ticks per episode
  int action_repeat = 4;   // ticks per step() call
  int image_size = 84;
  int frame_stack = 3;
  ShiftSetting shift_setting = ShiftSetting::train;
  std::uint64_t seed = 0;

  void validate() const {
    if (image_size < 32) throw ConfigError("env.image_size must be >= 32");
    if (image_size % 4 != 0) throw ConfigError("env.image_size must be divisible by 4");
    if (frame_stack < 1) throw ConfigError("env.frame_stack must be >= 1");
    if (episode_len < 1) throw ConfigError("env.episode_len must be >= 1");
    if (action_repeat < 1) throw ConfigError("env.action_repeat must be >= 1");
    if (!(sprite_radius > 0.0 && sprite_radius <= 0.25))
      throw ConfigError("env.sprite_radius must lie in (0, 0.25]");
    if (!(goal_radius > 0.0 && goal_radius <= 0.25))
      throw ConfigError("env.goal_radius must lie in (0, 0.25]");
    if (!(step_scale > 0.0)) throw ConfigError("env.step_scale must be positive");
  }

  // analytic fraction of image covered by the two discs (ignoring overlap)
  double task_area_fraction() const {
    const double pi = 3.14159265358979323846;
    return pi * (sprite_radius * sprite_radius + goal_radius * goal_radius);
  }
};

// One rendered frame, 8-bit planar RGB.
using Frame = std::vector<std::uint8_t>;

struct Observation {
  int frame_stack = 0;
  int image_size = 0;
  std::vector<std::uint8_t> pixels; // frame_stack * 3 * S * S, oldest frame first

  template <typename S>
  Tensor<S> to_tensor() const {
    Tensor<S> t({frame_stack * 3, image_size, image_size});
    for (std::size_t i = 0; i < pixels.size(); ++i)
      t.data[i] = static_cast<S>(pixels[i]) / S(255);
    return t;
  }
  bool operator==(const Observation& o) const {
    return frame_stack == o.frame_stack && image_size == o.image_size && pixels == o.pixels;
  }
};

struct EnvState {
  std::array<double, 2> sprite_pos{0.5, 0.5};
  std::array<double, 2> goal_pos{0.5, 0.5};
  long t = 0;                  // tick counter
  double distractor_phase = 0; // advances one unit per tick
  std::uint64_t episode_seed = 0;
  std::deque<Frame> frames;    // most recent frame_stack frames, oldest first
};

namespace detail {

struct Rgb {
  double r, g, b;
};

inline Rgb sprite_color() { return {230 / 255.0, 60 / 255.0, 50 / 255.0}; }
inline Rgb goal_color() { return {60 / 255.0, 220 / 255.0, 80 / 255.0}; }
inline Rgb train_bg() { return {44 / 255.0, 52 / 255.0, 96 / 255.0}; }
inline Rgb train_floor() { return {104 / 255.0, 104 / 255.0, 112 / 255.0}; }

inline double clamp01(double v) { return v < 0 ? 0 : (v > 1 ? 1 : v); }

// deterministic per-(seed,salt) uniform in [0,1)
inline double hash_u01(std::uint64_t seed, std::uint64_t salt) {
  return static_cast<double>(Rng::splitmix(seed ^ (salt * 0x9e3779b97f4a7c15ull)) >> 11) * 0x1.0p-53;
}

inline Rgb jitter(Rgb base, std::uint64_t seed, std::uint64_t salt, double width) {
  auto j = [&](double v, std::uint64_t k) {
    return clamp01(v + width * (2.0 * hash_u01(seed, salt * 8 + k) - 1.0));
  };
  return {j(base.r, 1), j(base.g, 2), j(base.b, 3)};
}

inline Rgb wide_random(std::uint64_t seed, std::uint64_t salt) {
  return {0.05 + 0.9 * hash_u01(seed, salt * 8 + 1), 0.05 + 0.9 * hash_u01(seed, salt * 8 + 2),
          0.05 + 0.9 * hash_u01(seed, salt * 8 + 3)};
}

// smooth value noise on an integer lattice, bilinear interpolation
inline double lattice_noise(std::uint64_t seed, double u, double v) {
  const double fu = std::floor(u), fv = std::floor(v);
  const long iu = static_cast<long>(fu), iv = static_cast<long>(fv);
  const double du = u - fu, dv = v - fv;
  auto val = [&](long a, long b) {
    std::uint64_t key = (static_cast<std::uint64_t>(a) * 0x8da6b343ull) ^
                        (static_cast<std::uint64_t>(b) * 0xd8163841ull);
    return hash_u01(seed, key);
  };
  const double su = du * du * (3 - 2 * du);
  const double sv = dv * dv * (3 - 2 * dv);
  const double top = val(iu, iv) * (1 - su) + val(iu + 1, iv) * su;
  const double bot = val(iu, iv + 1) * (1 - su) + val(iu + 1, iv + 1) * su;
  return top * (1 - sv) + bot * sv;
}

// high-contrast scrolling pattern for the video settings
inline Rgb video_pixel(std::uint64_t ep_seed, double phase, int x, int y, int size) {
  const double scroll = phase * 0.6;
  const double period = size / 5.0;
  const double u = (x + scroll) / period;
  const double v = y / period;
  auto chan = [&](std::uint64_t salt) {
    double n = lattice_noise(ep_seed ^ salt, u, v);
    double n2 = lattice_noise(ep_seed ^ (salt * 31), 2.3 * u, 2.3 * v);
    double m = 0.65 * n + 0.35 * n2;
    // sharpen towards the extremes so backgrounds stay far from training stats
    return clamp01(0.5 + 1.6 * (m - 0.5));
  };
  return {chan(0x1111), chan(0x2222), chan(0x3333)};
}

} // namespace detail

// Pure renderer: background per shift setting, then goal disc, then sprite on top.
inline Image render_frame(const EnvState& state, const EnvSpec& spec) {
  const int S = spec.image_size;
  Image img(S, S);

  detail::Rgb bg = detail::train_bg();
  detail::Rgb floorc = detail::train_floor();
  bool draw_floor = true;
  bool video = false;
  switch (spec.shift_setting) {
    case ShiftSetting::train: break;
    case ShiftSetting::color_easy:
      bg = detail::jitter(bg, state.episode_seed, 11, 0.06);
      floorc = detail::jitter(floorc, state.episode_seed, 23, 0.06);
      break;
    case ShiftSetting::color_hard:
      bg = detail::wide_random(state.episode_seed, 11);
      floorc = detail::wide_random(state.episode_seed, 23);
      break;
    case ShiftSetting::video_easy: video = true; break;
    case ShiftSetting::video_hard:
      video = true;
      draw_floor = false;
      break;
  }

  const int floor_top = static_cast<int>(0.82 * S);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      detail::Rgb c = video ? detail::video_pixel(state.episode_seed, state.distractor_phase, x, y, S)
                            : bg;
      if (draw_floor && y >= floor_top && !video) c = floorc;
      if (draw_floor && y >= floor_top && video) c = detail::train_floor();
      img.at(0, y, x) = quantize_u8(c.r);
      img.at(1, y, x) = quantize_u8(c.g);
      img.at(2, y, x) = quantize_u8(c.b);
    }

  auto draw_disc = [&](const std::array<double, 2>& pos, double radius, detail::Rgb c) {
    const double cx = pos[0] * S, cy = pos[1] * S, r = radius * S;
    const int x0 = std::max(0, static_cast<int>(cx - r - 1));
    const int x1 = std::min(S - 1, static_cast<int>(cx + r + 1));
    const int y0 = std::max(0, static_cast<int>(cy - r - 1));
    const int y1 = std::min(S - 1, static_cast<int>(cy + r + 1));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = cx - (x + 0.5), dy = cy - (y + 0.5);
        if (dx * dx + dy * dy <= r * r) {
          img.at(0, y, x) = quantize_u8(c.r);
          img.at(1, y, x) = quantize_u8(c.g);
          img.at(2, y, x) = quantize_u8(c.b);
        }
      }
  };
  draw_disc(state.goal_pos, spec.goal_radius, detail::goal_color());
  draw_disc(state.sprite_pos, spec.sprite_radius, detail::sprite_color());
  return img;
}

// Binary mask of task-relevant pixels (sprite and goal discs) for the state.
inline std::vector<std::uint8_t> ground_truth_mask(const EnvState& state, const EnvSpec& spec) {
  const int S = spec.image_size;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(S) * S, 0);
  auto mark = [&](const std::array<double, 2>& pos, double radius) {
    const double cx = pos[0] * S, cy = pos[1] * S, r = radius * S;
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        const double dx = cx - (x + 0.5), dy = cy - (y + 0.5);
        if (dx * dx + dy * dy <= r * r) mask[static_cast<std::size_t>(y) * S + x] = 1;
      }
  };
  mark(state.goal_pos, spec.goal_radius);
  mark(state.sprite_pos, spec.sprite_radius);
  return mask;
}

namespace detail {

inline Frame image_to_frame(const Image& img) { return img.pixels; }

inline Observation assemble_observation(const EnvState& state, const EnvSpec& spec) {
  Observation obs;
  obs.frame_stack = spec.frame_stack;
  obs.image_size = spec.image_size;
  obs.pixels.reserve(state.frames.size() * state.frames.front().size());
  for (const auto& f : state.frames) obs.pixels.insert(obs.pixels.end(), f.begin(), f.end());
  return obs;
}

inline double dist2d(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

} // namespace detail

inline std::pair<EnvState, Observation> env_reset(const EnvSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = named_stream(seed, "env/reset");
  EnvState st;
  const double ms = spec.sprite_radius, mg = spec.goal_radius;
  const double min_sep = spec.sprite_radius + spec.goal_radius;
  for (int tries = 0;; ++tries) {
    st.sprite_pos = {ms + rng.u01() * (1 - 2 * ms), ms + rng.u01() * (1 - 2 * ms)};
    st.goal_pos = {mg + rng.u01() * (1 - 2 * mg), mg + rng.u01() * (1 - 2 * mg)};
    if (detail::dist2d(st.sprite_pos, st.goal_pos) >= min_sep) break;
    if (tries > 10000) throw StateError("env reset: could not satisfy separation constraint");
  }
  st.t = 0;
  st.episode_seed = rng.next();
  st.distractor_phase = std::floor(rng.u01() * 512.0);
  Frame first = detail::image_to_frame(render_frame(st, spec));
  for (int i = 0; i < spec.frame_stack; ++i) st.frames.push_back(first);
  return {st, detail::assemble_observation(st, spec)};
}

struct StepResult {
  Observation obs;
  double reward = 0;
  bool done = false;
};

inline StepResult env_step(const EnvSpec& spec, EnvState& state, const std::array<double, 2>& action) {
  for (double a : action) {
    if (!std::isfinite(a) || a < -1.0 || a > 1.0)
      throw InputError("env step: action component outside [-1,1]");
  }
  StepResult res;
  const double sqrt2 = std::sqrt(2.0);
  const double lo = spec.sprite_radius, hi = 1.0 - spec.sprite_radius;
  for (int k = 0; k < spec.action_repeat && state.t < spec.episode_len; ++k) {
    state.sprite_pos[0] = std::clamp(state.sprite_pos[0] + spec.step_scale * action[0], lo, hi);
    state.sprite_pos[1] = std::clamp(state.sprite_pos[1] + spec.step_scale * action[1], lo, hi);
    state.t += 1;
    state.distractor_phase += 1.0;
    res.reward += 1.0 - detail::dist2d(state.sprite_pos, state.goal_pos) / sqrt2;
  }
  res.done = state.t >= spec.episode_len;
  state.frames.push_back(detail::image_to_frame(render_frame(state, spec)));
  while (static_cast<int>(state.frames.size()) > spec.frame_stack) state.frames.pop_front();
  res.obs = detail::assemble_observation(state, spec);
  return res;
}

// Owning convenience wrapper used by the training and evaluation loops.
class SpritePush {
 public:
  explicit SpritePush(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  const EnvSpec& spec() const { return spec_; }
  const EnvState& state() const { return state_; }

  Observation reset(std::uint64_t seed) {
    auto [st, obs] = env_reset(spec_, seed);
    state_ = std::move(st);
    return obs;
  }

  StepResult step(const std::array<double, 2>& action) { return env_step(spec_, state_, action); }

  int action_dim() const { return 2; }

 private:
  EnvSpec spec_;
  EnvState state_;
};

} // namespace smg::envgen
