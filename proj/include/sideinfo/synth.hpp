#pragma once

// Synthetic classification task with controllable side information.
//
// A hidden scalar state s does a standard Gaussian random walk; d-1 distractor
// walks u do the same. The observation is x_t = R [s_t, u_t] for a fixed
// random rotation R, and the label is y = 0 when s > 0, else 1 (the boundary
// s = 0 lands in class 1). Three side channels, each noised with
// N(0, side_noise_std^2):
//   direct     z_t = s_t + noise
//   embedded   z_t = Q [s_t + noise, v_t], with e-1 distractor walks v and a
//              fixed random rotation Q (e defaults to d/2)
//   relative   z_t = s_{t+1} - s_t + noise, one entry per transition,
//              encoding the forward change (row t describes t -> t+1)
//
// The rotations R and Q are the task's fixed sensor maps: trajectories that
// share a task_seed share them, so a model fit on one trajectory is evaluated
// through the same sensor on another. The remaining draws (starts, steps,
// channel noises, in that order) come from the trajectory stream, so
// (task_seed, seed) pins the output exactly.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sideinfo/eig.hpp"
#include "sideinfo/matrix.hpp"
#include "sideinfo/rng.hpp"

namespace sideinfo {

struct GeneratorConfig {
  std::size_t obs_dim = 50;    // d: observation dimension (state + d-1 distractors)
  std::size_t embed_dim = 0;   // e: embedded-channel dimension; 0 means d/2
  double side_noise_std = 0.05;
  std::size_t length = 100;    // T
  std::uint64_t seed = 0;
  std::uint64_t task_seed = 0; // draws R and Q; 0 falls back to seed
  bool keep_latents = true;    // false drops u/v and the rotations (test sets)

  std::size_t embedded_dim() const { return embed_dim == 0 ? obs_dim / 2 : embed_dim; }
};

struct Trajectory {
  Matrix x;           // T x d
  std::vector<int> y; // T
  Vec s;              // T, the hidden state
  Vec z_direct;       // T
  Matrix z_embedded;  // T x e
  Vec z_relative;     // T-1, entry t describes the step t -> t+1
  Matrix latents;     // T x d, columns [s, u]; empty when keep_latents is false
  Matrix rotation;    // R (d x d); empty when keep_latents is false
  Matrix embed_rot;   // Q (e x e); empty when keep_latents is false
};

inline Trajectory generate(const GeneratorConfig& cfg) {
  const std::size_t d = cfg.obs_dim;
  const std::size_t e = cfg.embedded_dim();
  const std::size_t T = cfg.length;
  if (d < 2) throw std::invalid_argument("generate: obs_dim must be >= 2");
  if (e < 1 || e > d) throw std::invalid_argument("generate: embed_dim must be in [1, obs_dim]");
  if (T < 2) throw std::invalid_argument("generate: length must be >= 2");
  if (cfg.side_noise_std < 0.0)
    throw std::invalid_argument("generate: side_noise_std must be >= 0");

  Rng task_rng =
      Rng(cfg.task_seed != 0 ? cfg.task_seed : cfg.seed).substream("task");
  const Matrix r = random_rotation(d, task_rng);
  const Matrix q = random_rotation(e, task_rng);

  Rng rng = Rng(cfg.seed).substream("data");

  // Latent walks: column 0 is s, columns 1..d-1 are distractors u; the
  // embedded channel carries its own e-1 distractor walks v.
  Matrix lat(T, d);
  Matrix v(T, e - 1 + 1);  // column 0 unused, keeps indexing symmetric
  for (std::size_t j = 0; j < d; ++j) lat(0, j) = rng.normal();
  for (std::size_t j = 1; j < e; ++j) v(0, j) = rng.normal();
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < d; ++j) lat(t, j) = lat(t - 1, j) + rng.normal();
    for (std::size_t j = 1; j < e; ++j) v(t, j) = v(t - 1, j) + rng.normal();
  }

  Trajectory out;
  out.s.resize(T);
  out.y.resize(T);
  out.x = Matrix(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    out.s[t] = lat(t, 0);
    out.y[t] = lat(t, 0) > 0.0 ? 0 : 1;
    for (std::size_t i = 0; i < d; ++i) {
      const double* rrow = r.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += rrow[j] * lat(t, j);
      out.x(t, i) = acc;
    }
  }

  out.z_direct.resize(T);
  for (std::size_t t = 0; t < T; ++t) out.z_direct[t] = out.s[t] + cfg.side_noise_std * rng.normal();

  out.z_embedded = Matrix(T, e);
  Vec pre(e);
  for (std::size_t t = 0; t < T; ++t) {
    pre[0] = out.s[t] + cfg.side_noise_std * rng.normal();
    for (std::size_t j = 1; j < e; ++j) pre[j] = v(t, j);
    for (std::size_t i = 0; i < e; ++i) {
      const double* qrow = q.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < e; ++j) acc += qrow[j] * pre[j];
      out.z_embedded(t, i) = acc;
    }
  }

  out.z_relative.resize(T - 1);
  for (std::size_t t = 0; t + 1 < T; ++t)
    out.z_relative[t] = out.s[t + 1] - out.s[t] + cfg.side_noise_std * rng.normal();

  if (cfg.keep_latents) {
    out.latents = std::move(lat);
    out.rotation = r;
    out.embed_rot = q;
  }
  return out;
}

}  // namespace sideinfo
