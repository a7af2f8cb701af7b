#include "cashbo/mlp.hpp"

#include <cmath>
#include <numeric>

#include "cashbo/error.hpp"

namespace cashbo {

namespace {

int total_params(const std::vector<int>& sizes) {
  int n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * (sizes[l] + 1);
  return n;
}

}  // namespace

Mlp Mlp::create(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw ConfigError("mlp needs at least input and output sizes");
  for (int s : sizes)
    if (s < 1) throw ConfigError("mlp layer sizes must be positive");
  Mlp m;
  m.sizes_ = sizes;
  m.params_.assign(total_params(sizes), 0.0);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l], fan_out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < fan_out * fan_in; ++i)
      m.params_[off + i] = rng.uniform_real(-bound, bound);
    off += static_cast<std::size_t>(fan_out) * (fan_in + 1);  // biases stay 0
  }
  return m;
}

Mlp Mlp::identity(int dim) {
  if (dim < 1) throw ConfigError("identity mlp needs positive dim");
  Mlp m;
  m.sizes_ = {dim, dim};
  m.params_.assign(static_cast<std::size_t>(dim) * (dim + 1), 0.0);
  for (int i = 0; i < dim; ++i) m.params_[static_cast<std::size_t>(i) * dim + i] = 1.0;
  m.fixed_ = true;
  return m;
}

Mlp Mlp::from_parts(std::vector<int> sizes, std::vector<double> params, bool fixed) {
  if (sizes.size() < 2) throw ConfigError("mlp needs at least input and output sizes");
  if (static_cast<int>(params.size()) != total_params(sizes))
    throw ConfigError("mlp parameter count does not match layer sizes");
  Mlp m;
  m.sizes_ = std::move(sizes);
  m.params_ = std::move(params);
  m.fixed_ = fixed;
  return m;
}

std::vector<double> Mlp::forward(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != input_dim())
    throw ConfigError("mlp forward: input dimension mismatch");
  std::vector<double> cur = x, next;
  std::size_t off = 0;
  for (int l = 0; l < num_layers(); ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    next.assign(out, 0.0);
    const bool hidden = l + 1 < num_layers();
    for (int j = 0; j < out; ++j) {
      double z = params_[off + static_cast<std::size_t>(out) * in + j];  // bias
      const std::size_t row = off + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) z += params_[row + i] * cur[i];
      next[j] = hidden ? std::tanh(z) : z;
    }
    off += static_cast<std::size_t>(out) * (in + 1);
    cur.swap(next);
  }
  return cur;
}

std::vector<double> Mlp::backward(const std::vector<double>& x,
                                  const std::vector<double>& upstream,
                                  std::vector<double>& param_grad) const {
  if (static_cast<int>(x.size()) != input_dim())
    throw ConfigError("mlp backward: input dimension mismatch");
  if (static_cast<int>(upstream.size()) != output_dim())
    throw ConfigError("mlp backward: upstream dimension mismatch");
  if (param_grad.empty()) param_grad.assign(params_.size(), 0.0);
  if (param_grad.size() != params_.size())
    throw ConfigError("mlp backward: gradient buffer size mismatch");

  // Forward pass keeping post-activation values per layer.
  const int L = num_layers();
  std::vector<std::vector<double>> act(L + 1);
  act[0] = x;
  std::vector<std::size_t> offsets(L);
  std::size_t off = 0;
  for (int l = 0; l < L; ++l) {
    offsets[l] = off;
    const int in = sizes_[l], out = sizes_[l + 1];
    act[l + 1].assign(out, 0.0);
    const bool hidden = l + 1 < L;
    for (int j = 0; j < out; ++j) {
      double z = params_[off + static_cast<std::size_t>(out) * in + j];
      const std::size_t row = off + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) z += params_[row + i] * act[l][i];
      act[l + 1][j] = hidden ? std::tanh(z) : z;
    }
    off += static_cast<std::size_t>(out) * (in + 1);
  }

  // Backward pass. delta holds dL/dz for the current layer.
  std::vector<double> delta = upstream, prev;
  for (int l = L - 1; l >= 0; --l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const std::size_t o = offsets[l];
    if (l + 1 < L)  // tanh': 1 - a^2 with a the stored activation
      for (int j = 0; j < out; ++j) delta[j] *= 1.0 - act[l + 1][j] * act[l + 1][j];
    prev.assign(in, 0.0);
    for (int j = 0; j < out; ++j) {
      const std::size_t row = o + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) {
        param_grad[row + i] += delta[j] * act[l][i];
        prev[i] += delta[j] * params_[row + i];
      }
      param_grad[o + static_cast<std::size_t>(out) * in + j] += delta[j];
    }
    delta.swap(prev);
  }
  return delta;
}

std::vector<char> Mlp::trainable_mask(MaskMode mode) const {
  std::vector<char> mask(params_.size(), 0);
  if (fixed_) return mask;
  const std::size_t from = mode == MaskMode::all ? 0 : static_cast<std::size_t>(last_layer_offset());
  for (std::size_t i = from; i < mask.size(); ++i) mask[i] = 1;
  return mask;
}

int Mlp::last_layer_offset() const {
  int off = 0;
  for (int l = 0; l + 1 < num_layers(); ++l) off += sizes_[l + 1] * (sizes_[l] + 1);
  return off;
}

MaskMode mask_mode_from_name(const std::string& name) {
  if (name == "all") return MaskMode::all;
  if (name == "last_layer") return MaskMode::last_layer;
  throw ConfigError("unknown mask mode '" + name + "'");
}

const char* mask_mode_name(MaskMode mode) {
  return mode == MaskMode::all ? "all" : "last_layer";
}

}  // namespace cashbo
