// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace htvgnn {

namespace {

constexpr const char* kMagic = "htvgnn-checkpoint 1";

void write_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  os.write(bytes, 8);
}

double read_f64(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw CheckpointError("checkpoint payload truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, Ablation ablation,
                     const Normalizer& normalizer, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << kMagic << '\n';
  std::istringstream cfg(config.to_text());
  std::string line;
  while (std::getline(cfg, line)) out << "config " << line << '\n';
  out << "ablation " << to_string(ablation) << '\n';
  out << "channels " << normalizer.mean.size() << '\n';
  for (std::size_t k = 0; k < normalizer.mean.size(); ++k) {
    out << "norm " << std::bit_cast<std::uint64_t>(normalizer.mean[k]) << ' '
        << std::bit_cast<std::uint64_t>(normalizer.std[k]) << '\n';
  }
  for (const auto& [name, t] : params.store.entries()) {
    out << "tensor " << name << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
  }
  out << "end\n";
  for (const auto& [name, t] : params.store.entries()) {
    for (double v : t.data()) write_f64(out, v);
  }
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw CheckpointError(path.string() + " is not a checkpoint");
  std::string config_text;
  std::vector<std::pair<std::string, Shape>> manifest;
  Checkpoint ck;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream fields(line);
    std::string kind;
    fields >> kind;
    if (kind == "config") {
      config_text += line.substr(7) + '\n';
    } else if (kind == "ablation") {
      std::string name;
      fields >> name;
      ck.ablation = parse_ablation(name);
    } else if (kind == "channels") {
      // informational; the norm lines carry the values
    } else if (kind == "norm") {
      std::uint64_t m = 0, s = 0;
      if (!(fields >> m >> s)) throw CheckpointError("malformed norm line in checkpoint");
      ck.normalizer.mean.push_back(std::bit_cast<double>(m));
      ck.normalizer.std.push_back(std::bit_cast<double>(s));
    } else if (kind == "tensor") {
      std::string name;
      std::size_t rank = 0;
      if (!(fields >> name >> rank)) throw CheckpointError("malformed tensor line in checkpoint");
      Shape shape(rank);
      for (auto& d : shape) {
        if (!(fields >> d)) throw CheckpointError("malformed shape for " + name);
      }
      manifest.emplace_back(name, shape);
    } else {
      throw CheckpointError("unknown checkpoint record '" + kind + "'");
    }
  }
  if (!ended) throw CheckpointError("checkpoint manifest is not terminated");
  ck.config = ModelConfig::from_text(config_text);
  ck.params = init_params(ck.config, 0);
  const auto& entries = ck.params.store.entries();
  if (entries.size() != manifest.size()) throw CheckpointError("checkpoint tensor count does not match its config");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != manifest[i].first || entries[i].second.shape() != manifest[i].second) {
      throw CheckpointError("checkpoint tensor " + manifest[i].first + " does not match the model layout");
    }
    Tensor t = entries[i].second;
    for (auto& v : t.mutable_data()) v = read_f64(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after checkpoint payload");
  return ck;
}

}  // namespace htvgnn
