// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/model.hpp"

#include <cmath>
#include <sstream>

#include "htvgnn/graphs.hpp"
#include "htvgnn/ops.hpp"

namespace htvgnn {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ContractError(std::string("config: ") + what + " must be positive");
  };
  positive(nodes, "nodes");
  positive(channels, "channels");
  positive(steps_per_day, "steps_per_day");
  positive(history, "history");
  positive(horizon, "horizon");
  positive(batch, "batch");
  positive(heads, "heads");
  positive(width, "width");
  positive(graph_dim, "graph_dim");
  positive(mask_dim, "mask_dim");
  positive(ctvgcrm_layers, "ctvgcrm_layers");
  if (width % heads != 0) throw ContractError("config: width must be divisible by heads");
  if (width % 2 != 0) throw ContractError("config: width must be even for positional encoding");
  if (dropout < 0.0 || dropout >= 1.0) throw ContractError("config: dropout must lie in [0, 1)");
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "name=" << name << '\n'
     << "nodes=" << nodes << '\n'
     << "channels=" << channels << '\n'
     << "steps_per_day=" << steps_per_day << '\n'
     << "history=" << history << '\n'
     << "horizon=" << horizon << '\n'
     << "encoder_layers=" << encoder_layers << '\n'
     << "decoder_layers=" << decoder_layers << '\n'
     << "batch=" << batch << '\n'
     << "heads=" << heads << '\n'
     << "width=" << width << '\n'
     << "graph_dim=" << graph_dim << '\n'
     << "mask_dim=" << mask_dim << '\n'
     << "ctvgcrm_layers=" << ctvgcrm_layers << '\n'
     << "dropout=" << dropout << '\n';
  return os.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ContractError("config: expected key=value, got '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    auto as_size = [&]() -> std::size_t {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw ContractError("config: '" + key + "' expects an integer, got '" + value + "'");
      }
    };
    if (key == "name") c.name = value;
    else if (key == "nodes") c.nodes = as_size();
    else if (key == "channels") c.channels = as_size();
    else if (key == "steps_per_day") c.steps_per_day = as_size();
    else if (key == "history") c.history = as_size();
    else if (key == "horizon") c.horizon = as_size();
    else if (key == "encoder_layers") c.encoder_layers = as_size();
    else if (key == "decoder_layers") c.decoder_layers = as_size();
    else if (key == "batch") c.batch = as_size();
    else if (key == "heads") c.heads = as_size();
    else if (key == "width") c.width = as_size();
    else if (key == "graph_dim") c.graph_dim = as_size();
    else if (key == "mask_dim") c.mask_dim = as_size();
    else if (key == "ctvgcrm_layers") c.ctvgcrm_layers = as_size();
    else if (key == "dropout") c.dropout = std::stod(value);
    else throw ContractError("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

namespace {

ModelConfig published(const char* name, std::size_t nodes, std::size_t batch, std::size_t graph_dim,
                      std::size_t mask_dim) {
  ModelConfig c;
  c.name = name;
  c.nodes = nodes;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.batch = batch;
  c.heads = 8;
  c.width = 64;
  c.graph_dim = graph_dim;
  c.mask_dim = mask_dim;
  c.ctvgcrm_layers = 2;
  return c;
}

}  // namespace

ModelConfig preset(const std::string& name) {
  if (name == "pems03") return published("pems03", 358, 16, 8, 8);
  if (name == "pems04") return published("pems04", 307, 4, 6, 18);
  if (name == "pems07") return published("pems07", 883, 8, 10, 24);
  if (name == "pems08") return published("pems08", 170, 16, 5, 15);
  if (name == "synthetic") {
    ModelConfig c;
    c.name = "synthetic";
    c.nodes = 8;
    c.steps_per_day = 48;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    c.batch = 16;
    c.heads = 2;
    c.width = 16;
    c.graph_dim = 4;
    c.mask_dim = 4;
    c.ctvgcrm_layers = 1;
    return c;
  }
  throw ContractError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"pems03", "pems04", "pems07", "pems08", "synthetic"}; }

Ablation parse_ablation(const std::string& name) {
  if (name == "full") return Ablation::full;
  if (name == "wo-tm") return Ablation::wo_tm;
  if (name == "wo-cg") return Ablation::wo_cg;
  if (name == "wo-bc") return Ablation::wo_bc;
  if (name == "wo-etpmsa") return Ablation::wo_etpmsa;
  if (name == "wo-tv") return Ablation::wo_tv;
  if (name == "wo-tr") return Ablation::wo_tr;
  throw ContractError("unknown ablation '" + name + "'");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::wo_tm: return "wo-tm";
    case Ablation::wo_cg: return "wo-cg";
    case Ablation::wo_bc: return "wo-bc";
    case Ablation::wo_etpmsa: return "wo-etpmsa";
    case Ablation::wo_tv: return "wo-tv";
    case Ablation::wo_tr: return "wo-tr";
  }
  return "unknown";
}

AblationFlags flags_for(Ablation a) {
  AblationFlags f;
  switch (a) {
    case Ablation::full:
      break;
    case Ablation::wo_tm:
      f.mask_embeddings = false;
      break;
    case Ablation::wo_cg:
      f.static_graphs = GraphKind::no_coupling;
      break;
    case Ablation::wo_bc:
      f.mask_embeddings = false;
      f.static_graphs = GraphKind::no_coupling;
      break;
    case Ablation::wo_etpmsa:
      f.attention = false;
      break;
    case Ablation::wo_tv:
      f.static_graphs = GraphKind::topology_only;
      f.dynamic_graphs = false;
      break;
    case Ablation::wo_tr:
      f.recurrent = false;
      break;
  }
  return f;
}

Tensor ParamStore::add(const std::string& name, Shape shape, std::vector<double> values) {
  if (index_.count(name)) throw ContractError("duplicate parameter name " + name);
  Tensor t(std::move(shape), std::move(values), true);
  index_[name] = entries_.size();
  entries_.emplace_back(name, t);
  return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("no parameter named " + name);
  return entries_[it->second].second;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) != 0; }

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(t);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

std::vector<std::vector<double>> ModelParams::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : store.entries()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

void ModelParams::restore(const std::vector<std::vector<double>>& values) {
  const auto& entries = store.entries();
  if (values.size() != entries.size()) throw ContractError("snapshot does not match parameter set");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor t = entries[i].second;
    if (values[i].size() != t.numel()) throw ContractError("snapshot size mismatch for " + entries[i].first);
    std::copy(values[i].begin(), values[i].end(), t.mutable_data().begin());
  }
}

void ModelParams::zero_grad() {
  for (const auto& entry : store.entries()) {
    Tensor t = entry.second;
    t.zero_grad();
  }
}

namespace {

class Initializer {
 public:
  Initializer(ParamStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  Tensor uniform(const std::string& name, Shape shape, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng_);
    return store_.add(name, std::move(shape), std::move(v));
  }
  Tensor weight(const std::string& name, Shape shape, std::size_t fan_in) {
    return uniform(name, std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan_in)));
  }
  Tensor embedding(const std::string& name, Shape shape) { return uniform(name, std::move(shape), 0.1); }
  Tensor constant(const std::string& name, Shape shape, double value) {
    const auto n = shape_numel(shape);
    return store_.add(name, std::move(shape), std::vector<double>(n, value));
  }

 private:
  ParamStore& store_;
  std::mt19937_64 rng_;
};

GraphConvParams conv_params(Initializer& init, const std::string& prefix, std::size_t embed, std::size_t d_in,
                            std::size_t d_h) {
  GraphConvParams p;
  p.weight_pool = init.weight(prefix + ".weight_pool", {embed, d_in * d_h}, embed);
  p.bias_pool = init.weight(prefix + ".bias_pool", {embed, d_h}, embed);
  return p;
}

GateParams gate_params(Initializer& init, const std::string& prefix, std::size_t graph_dim, std::size_t d_in,
                       std::size_t d_h) {
  GateParams g;
  g.static_branch = conv_params(init, prefix + ".static", graph_dim, d_in, d_h);
  g.dynamic_branch = conv_params(init, prefix + ".dynamic", graph_dim, d_in, d_h);
  g.fusion = init.weight(prefix + ".fusion", {2 * d_h, d_h}, 2 * d_h);
  return g;
}

}  // namespace

ModelParams init_params(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  ModelParams p;
  Initializer init(p.store, seed);
  const std::size_t d = c.width;
  p.input_weight = init.weight("input.weight", {c.channels, d}, c.channels);
  p.input_bias = init.weight("input.bias", {d}, c.channels);
  p.mask.node = init.embedding("mask.node", {c.nodes, c.mask_dim});
  p.mask.daily = init.embedding("mask.daily", {c.steps_per_day, c.mask_dim});
  p.mask.weekly = init.embedding("mask.weekly", {7, c.mask_dim});
  for (std::size_t l = 0; l < c.encoder_layers; ++l) {
    const std::string prefix = "encoder." + std::to_string(l);
    EncoderLayerParams e;
    e.attention.heads = c.heads;
    e.attention.w_query = init.weight(prefix + ".query", {d, d}, d);
    e.attention.w_key = init.weight(prefix + ".key", {d, d}, d);
    e.attention.w_value = init.weight(prefix + ".value", {d, d}, d);
    e.attention.w_out = init.weight(prefix + ".out", {d, d}, d);
    e.norm_gain = init.constant(prefix + ".norm.gain", {d}, 1.0);
    e.norm_bias = init.constant(prefix + ".norm.bias", {d}, 0.0);
    p.encoder.push_back(e);
  }
  p.static_graph.node = init.embedding("graph.static.node", {c.nodes, c.graph_dim});
  p.static_graph.step_bias = init.embedding("graph.static.step_bias", {c.history, c.nodes, c.graph_dim});
  p.static_graph.coupling = init.weight("graph.static.coupling", {c.history, c.history}, c.history);
  for (std::size_t l = 0; l < c.ctvgcrm_layers; ++l) {
    const std::string prefix = "ctvgcrm." + std::to_string(l);
    RecurrentLayerParams r;
    r.dynamic.w_map = init.weight(prefix + ".dynamic.map", {d, c.graph_dim}, d);
    r.dynamic.attn = init.weight(prefix + ".dynamic.attn", {2 * c.graph_dim}, 2 * c.graph_dim);
    const std::size_t d_in = 2 * d;  // layer input (width D) joined with the hidden state (width D)
    r.cell.update = gate_params(init, prefix + ".update", c.graph_dim, d_in, d);
    r.cell.reset = gate_params(init, prefix + ".reset", c.graph_dim, d_in, d);
    r.cell.candidate = gate_params(init, prefix + ".candidate", c.graph_dim, d_in, d);
    p.recurrent.push_back(r);
  }
  p.head_weight = init.weight("head.weight", {d, c.horizon * c.channels}, d);
  p.head_bias = init.weight("head.bias", {c.horizon * c.channels}, d);
  return p;
}

Tensor forward(const ForecastBatch& batch, const ModelParams& params, const ModelConfig& c, Ablation ablation,
               const ModelContext& context, const ForwardOptions& options) {
  const AblationFlags flags = flags_for(ablation);
  const Tensor& x = batch.x;
  if (x.rank() != 4 || x.dim(1) != c.history || x.dim(2) != c.nodes || x.dim(3) != c.channels) {
    throw ContractError("forward: batch " + shape_str(x.shape()) + " does not match config (T=" +
                        std::to_string(c.history) + ", N=" + std::to_string(c.nodes) + ", C=" +
                        std::to_string(c.channels) + ")");
  }
  const std::size_t b = x.dim(0), steps = c.history, n = c.nodes, d = c.width;
  const bool use_dropout = options.training && c.dropout > 0.0;
  if (use_dropout && options.rng == nullptr) throw ContractError("forward: dropout needs an rng");

  Tensor h = matmul(x, params.input_weight) + params.input_bias;
  if (flags.attention) {
    h = h + reshape(positional_encoding(steps, d), {steps, 1, d});
    Tensor masks;
    if (flags.mask_embeddings) masks = mask_matrix(mask_embeddings(params.mask, batch.tod, batch.dow, b, steps));
    for (const auto& layer : params.encoder) {
      Tensor a = flags.mask_embeddings ? etpmsa(h, masks, layer.attention) : mhsa_plain(h, layer.attention);
      if (use_dropout) a = dropout(a, c.dropout, *options.rng);
      h = layer_norm(h + a) * layer.norm_gain + layer.norm_bias;
    }
  }

  const StaticGraphProvider provider(flags.static_graphs, context.topology);
  const Tensor static_graphs = provider.graphs(params.static_graph);
  const Tensor static_embeddings = provider.embeddings(params.static_graph);
  Tensor topology_norm;
  if (!flags.dynamic_graphs || !flags.recurrent) topology_norm = row_normalize(context.topology);

  Tensor last;
  for (std::size_t l = 0; l < params.recurrent.size(); ++l) {
    const auto& layer = params.recurrent[l];
    Tensor state = Tensor::zeros({b, n, d});
    std::vector<Tensor> outputs;
    const bool keep_sequence = l + 1 < params.recurrent.size();
    for (std::size_t t = 0; t < steps; ++t) {
      Tensor input = reshape(narrow(h, 1, t, 1), {b, n, h.dim(-1)});
      Tensor graph_s = reshape(narrow(static_graphs, 0, t, 1), {n, n});
      Tensor embed_s = reshape(narrow(static_embeddings, 0, t, 1), {n, c.graph_dim});
      if (flags.recurrent) {
        DynamicGraph dyn = dynamic_graph_at(layer.dynamic, input, context.dynamic_mask);
        Tensor graph_d = flags.dynamic_graphs ? dyn.adjacency : topology_norm;
        state = cell_step(input, state, graph_s, graph_d, embed_s, dyn.embedding, layer.cell);
      } else {
        Tensor padded = concat({input, Tensor::zeros({b, n, d})}, -1);
        state = tanh(graph_conv(padded, topology_norm, embed_s, layer.cell.candidate.static_branch));
      }
      if (keep_sequence) outputs.push_back(state);
    }
    if (keep_sequence) h = stack(outputs, 1);
    last = state;
  }

  Tensor out = matmul(last, params.head_weight) + params.head_bias;
  out = permute(reshape(out, {b, n, c.horizon, c.channels}), {0, 2, 1, 3});
  const auto& norm = context.normalizer;
  if (norm.mean.size() != c.channels || norm.std.size() != c.channels) {
    throw ContractError("forward: normalizer channel count differs from config");
  }
  return out * Tensor({c.channels}, norm.std) + Tensor({c.channels}, norm.mean);
}

}  // namespace htvgnn
