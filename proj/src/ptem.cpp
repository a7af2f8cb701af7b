#include "cashbo/ptem.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cashbo/error.hpp"
#include "cashbo/textio.hpp"

namespace cashbo {

void PtemBundle::validate_against(const SearchSpace& space) const {
  if (num_models() != space.num_algorithms())
    throw ConfigError("ptem has " + std::to_string(num_models()) + " models but space has " +
                      std::to_string(space.num_algorithms()) + " algorithms");
  for (int m = 0; m < num_models(); ++m) {
    if (models[m].input_dim() != space.dim(m))
      throw ConfigError("ptem model " + std::to_string(m) + " input dim " +
                        std::to_string(models[m].input_dim()) + " != space dim " +
                        std::to_string(space.dim(m)));
    if (models[m].output_dim() != latent_dim())
      throw ConfigError("ptem models disagree on latent dimension");
  }
}

PtemBundle make_random_ptem(const SearchSpace& space, int latent_dim, Rng& rng) {
  space.validate();
  PtemBundle b;
  b.space_fingerprint = space.fingerprint();
  for (int m = 0; m < space.num_algorithms(); ++m) {
    auto sub = rng.fork(static_cast<std::uint64_t>(m));
    b.models.push_back(
        Mlp::create({space.dim(m), kHiddenWidth, kHiddenWidth, latent_dim}, sub));
  }
  return b;
}

std::string ptem_to_text(const PtemBundle& bundle) {
  std::string out = "cashbo-ptem v1\n";
  out += "source " + bundle.source_id + "\n";
  out += "space " + to_hex16_u64(bundle.space_fingerprint) + "\n";
  out += "ybest " + to_hex16(bundle.y_best) + "\n";
  out += "models " + std::to_string(bundle.num_models()) + "\n";
  for (int m = 0; m < bundle.num_models(); ++m) {
    const auto& net = bundle.models[m];
    out += "model " + std::to_string(m) + " fixed " + (net.fixed() ? "1" : "0") + " sizes";
    for (int s : net.sizes()) out += " " + std::to_string(s);
    out += "\n";
    out += "params " + std::to_string(net.param_count());
    for (double p : net.params()) out += " " + to_hex16(p);
    out += "\n";
  }
  out += "check " + to_hex16_u64(fnv1a64(out)) + "\n";
  return out;
}

namespace {

std::string next_line(const std::string& text, std::size_t& pos) {
  if (pos >= text.size()) throw ConfigError("ptem file truncated");
  const auto nl = text.find('\n', pos);
  const auto end = nl == std::string::npos ? text.size() : nl;
  std::string line = text.substr(pos, end - pos);
  pos = nl == std::string::npos ? text.size() : nl + 1;
  return line;
}

}  // namespace

PtemBundle ptem_from_text(const std::string& text) {
  std::size_t pos = 0;
  const auto header = next_line(text, pos);
  if (header.rfind("cashbo-ptem", 0) != 0) throw ConfigError("not a ptem file");
  if (header != "cashbo-ptem v1")
    throw ConfigError("unsupported ptem version '" + header.substr(12) + "'");

  PtemBundle b;
  auto line = next_line(text, pos);
  if (line.rfind("source ", 0) != 0) throw ConfigError("ptem file corrupt: expected source");
  b.source_id = line.substr(7);

  line = next_line(text, pos);
  if (line.rfind("space ", 0) != 0) throw ConfigError("ptem file corrupt: expected space");
  b.space_fingerprint = from_hex16_u64(line.substr(6));

  line = next_line(text, pos);
  if (line.rfind("ybest ", 0) != 0) throw ConfigError("ptem file corrupt: expected ybest");
  b.y_best = from_hex16(line.substr(6));

  line = next_line(text, pos);
  int num_models = 0;
  if (std::sscanf(line.c_str(), "models %d", &num_models) != 1 || num_models < 1)
    throw ConfigError("ptem file corrupt: expected models count");

  for (int m = 0; m < num_models; ++m) {
    line = next_line(text, pos);
    std::istringstream hs(line);
    std::string tok;
    int idx = -1, fixed = -1;
    hs >> tok >> idx;
    if (tok != "model" || idx != m) throw ConfigError("ptem file corrupt: expected model header");
    hs >> tok >> fixed;
    if (tok != "fixed" || (fixed != 0 && fixed != 1))
      throw ConfigError("ptem file corrupt: bad fixed flag");
    hs >> tok;
    if (tok != "sizes") throw ConfigError("ptem file corrupt: expected sizes");
    std::vector<int> sizes;
    int s;
    while (hs >> s) sizes.push_back(s);
    if (sizes.size() < 2) throw ConfigError("ptem file corrupt: too few layer sizes");

    line = next_line(text, pos);
    std::istringstream ps(line);
    int count = -1;
    ps >> tok >> count;
    if (tok != "params" || count < 0) throw ConfigError("ptem file corrupt: expected params");
    std::vector<double> params;
    params.reserve(count);
    std::string hex;
    while (ps >> hex) params.push_back(from_hex16(hex));
    if (static_cast<int>(params.size()) != count)
      throw ConfigError("ptem file corrupt: param count mismatch");
    b.models.push_back(Mlp::from_parts(std::move(sizes), std::move(params), fixed == 1));
  }

  const std::size_t body_end = pos;
  line = next_line(text, pos);
  if (line.rfind("check ", 0) != 0) throw ConfigError("ptem file corrupt: missing checksum");
  if (from_hex16_u64(line.substr(6)) != fnv1a64(std::string_view(text).substr(0, body_end)))
    throw ConfigError("ptem file corrupt: checksum mismatch");
  return b;
}

void ptem_save(const PtemBundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write ptem file '" + path + "'");
  out << ptem_to_text(bundle);
}

PtemBundle ptem_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open ptem file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ptem_from_text(ss.str());
}

PtemBundle ptem_load(const std::string& path, const SearchSpace& space) {
  auto b = ptem_load(path);
  if (b.space_fingerprint != space.fingerprint())
    throw ConfigError("ptem file '" + path + "' was trained on a different search space");
  b.validate_against(space);
  return b;
}

}  // namespace cashbo
