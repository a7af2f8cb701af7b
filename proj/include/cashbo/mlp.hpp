#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cashbo/rng.hpp"

namespace cashbo {

inline constexpr int kLatentDim = 3;
inline constexpr int kHiddenWidth = 32;

// Which embedding parameters an optimizer may touch. last_layer restricts
// updates to the output layer (fine-tuning); all opens every parameter.
enum class MaskMode { all, last_layer };

// Fully connected network with tanh hidden layers and a linear output layer.
// Parameters live in one flat vector (per layer: row-major W then b) so that
// optimizers, trainable masks, and regularizers can treat the model as a
// single coordinate block.
class Mlp {
public:
  Mlp() = default;

  // Random init, weights uniform on (-1/sqrt(fan_in), +1/sqrt(fan_in)),
  // biases zero. sizes = {input, hidden..., output}.
  static Mlp create(const std::vector<int>& sizes, Rng& rng);

  // Single linear layer with W = I, b = 0, reported as non-trainable.
  // Routes a surrogate straight through raw coordinates.
  static Mlp identity(int dim);

  // Rebuild from serialized parts. params.size() must match the layer sizes.
  static Mlp from_parts(std::vector<int> sizes, std::vector<double> params, bool fixed);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int param_count() const { return static_cast<int>(params_.size()); }
  bool fixed() const { return fixed_; }
  const std::vector<int>& sizes() const { return sizes_; }

  const std::vector<double>& params() const { return params_; }
  std::vector<double>& params() { return params_; }

  std::vector<double> forward(const std::vector<double>& x) const;

  // Reverse-mode gradients of forward. Adds dL/dtheta into param_grad
  // (resized and zeroed if empty) and returns dL/dx.
  std::vector<double> backward(const std::vector<double>& x, const std::vector<double>& upstream,
                               std::vector<double>& param_grad) const;

  // Per-parameter trainability. A fixed model is all-false regardless of
  // mode; otherwise last_layer selects only the output layer's W and b.
  std::vector<char> trainable_mask(MaskMode mode) const;

  // Flat offset of the first output-layer parameter.
  int last_layer_offset() const;

private:
  std::vector<int> sizes_;
  std::vector<double> params_;
  bool fixed_ = false;
};

MaskMode mask_mode_from_name(const std::string& name);
const char* mask_mode_name(MaskMode mode);

}  // namespace cashbo
