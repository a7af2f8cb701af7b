#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cashbo/mlp.hpp"
#include "cashbo/space.hpp"

namespace cashbo {

// A pre-trained embedding bundle: one MLP per algorithm of the space it was
// trained on, plus the best score seen on the source task. y_best feeds the
// surrogate prior mean; the fingerprint pins the bundle to its SearchSpace.
struct PtemBundle {
  std::vector<Mlp> models;
  double y_best = 0.0;
  std::string source_id;
  std::uint64_t space_fingerprint = 0;

  int num_models() const { return static_cast<int>(models.size()); }
  int latent_dim() const { return models.empty() ? 0 : models.front().output_dim(); }

  // Shape check against a space: model count and input dims must line up and
  // all outputs must share one latent dimension.
  void validate_against(const SearchSpace& space) const;
};

// Fresh randomly initialized bundle for a space (the "random PTEM" ablation
// arm and the pre-training starting point).
PtemBundle make_random_ptem(const SearchSpace& space, int latent_dim, Rng& rng);

// Versioned text format; see docs/FORMATS.md. Round-trips bit-exactly.
void ptem_save(const PtemBundle& bundle, const std::string& path);
PtemBundle ptem_load(const std::string& path);
// Also enforces the space fingerprint.
PtemBundle ptem_load(const std::string& path, const SearchSpace& space);

std::string ptem_to_text(const PtemBundle& bundle);
PtemBundle ptem_from_text(const std::string& text);

}  // namespace cashbo
