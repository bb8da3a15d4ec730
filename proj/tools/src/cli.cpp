// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/cli.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "htvgnn/checkpoint.hpp"
#include "htvgnn/hash.hpp"
#include "htvgnn/synthetic.hpp"
#include "htvgnn/trainer.hpp"
#include "htvgnn/verify.hpp"

namespace htvgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSyntheticVersion = "synthetic-v1";

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_bytes(path));
  } catch (const json::exception& e) {
    throw UserError("malformed " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UserError("cannot write " + path.string());
    out << text;
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string hash_values(const Tensor& t) {
  ContentHash h;
  for (auto d : t.shape()) h.update(static_cast<std::uint64_t>(d));
  h.update(t.data());
  return h.hex();
}

std::string hash_file(const fs::path& path) {
  ContentHash h;
  h.update(std::string_view(read_bytes(path)));
  return h.hex();
}

SplitRatios parse_ratios(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UserError("--ratios: '" + item + "' is not a number");
    }
  }
  if (v.size() != 3) throw UserError("--ratios needs exactly three values (train,val,test), got " + std::to_string(v.size()));
  for (double r : v) {
    if (!(r > 0.0)) throw UserError("--ratios values must be positive");
  }
  const double total = v[0] + v[1] + v[2];
  if (std::abs(total - 1.0) > 1e-9) throw UserError("--ratios must sum to 1");
  return {v[0], v[1], v[2]};
}

HorizonMode parse_horizon_mode(const std::string& name) {
  if (name == "cumulative") return HorizonMode::cumulative;
  if (name == "single-step") return HorizonMode::single_step;
  throw UserError("unknown horizon mode '" + name + "' (expected cumulative or single-step)");
}

Tensor as_matrix(const Tensor& packed) {
  if (packed.rank() != 3 || packed.dim(0) != packed.dim(1) || packed.dim(2) != 1) {
    throw UserError("graph file has shape " + shape_str(packed.shape()) + ", expected [N, N, 1]");
  }
  return Tensor({packed.dim(0), packed.dim(1)}, {packed.data().begin(), packed.data().end()});
}

Tensor as_packed(const Tensor& matrix) {
  return Tensor({matrix.dim(0), matrix.dim(1), 1}, {matrix.data().begin(), matrix.data().end()});
}

// ---------------------------------------------------------------- prepared data

struct Prepared {
  fs::path dir;
  json manifest;
  SeriesDataset dataset;
  Tensor topology;
  SplitRatios ratios;
  std::size_t history = 12;
  std::size_t horizon = 12;
};

fs::path latest_pointer() { return cache_root() / "latest.json"; }

Prepared load_prepared(const std::string& explicit_dir) {
  fs::path dir;
  if (!explicit_dir.empty()) {
    dir = explicit_dir;
  } else {
    if (!fs::exists(latest_pointer())) {
      throw UserError("no prepared data under " + cache_root().string() +
                      "; run `htvgnn prepare --data <path|synthetic>` first");
    }
    dir = cache_root() / read_json(latest_pointer()).at("prepared").get<std::string>();
  }
  if (!fs::exists(dir / "manifest.json")) {
    throw UserError("prepared cache " + dir.string() + " is missing; run `htvgnn prepare` first");
  }
  Prepared p;
  p.dir = dir;
  p.manifest = read_json(dir / "manifest.json");
  const json& m = p.manifest;
  p.dataset.values = load_packed(dir / "values.bin");
  p.dataset.interval_minutes = m.at("interval_minutes").get<int>();
  p.dataset.samples_per_day = m.at("samples_per_day").get<std::size_t>();
  p.dataset.start_day_of_week = m.at("start_day_of_week").get<int>();
  p.dataset.validate();
  if (hash_values(p.dataset.values) != m.at("values_hash").get<std::string>()) {
    throw UserError("prepared values in " + dir.string() + " do not match their manifest; rerun `htvgnn prepare`");
  }
  p.topology = as_matrix(load_packed(dir / "topology.bin"));
  const auto r = m.at("ratios").get<std::vector<double>>();
  p.ratios = {r.at(0), r.at(1), r.at(2)};
  p.history = m.at("history").get<std::size_t>();
  p.horizon = m.at("horizon").get<std::size_t>();
  return p;
}

struct PatternGraph {
  fs::path file;
  std::string hash;
  Tensor adjacency;
};

std::string dtw_key(const Prepared& p, double sparsity) {
  ContentHash h;
  h.update(std::string_view(p.manifest.at("hash").get<std::string>()));
  h.update(std::bit_cast<std::uint64_t>(sparsity));
  return h.hex();
}

PatternGraph load_pattern_graph(const Prepared& p, std::optional<double> sparsity) {
  fs::path file;
  if (sparsity) {
    file = p.dir / ("dtw_" + dtw_key(p, *sparsity) + ".bin");
  } else {
    if (!fs::exists(p.dir / "dtw.json")) {
      throw UserError("no pattern graph for " + p.dir.string() + "; run `htvgnn dtw --sparsity <s>` first");
    }
    file = p.dir / read_json(p.dir / "dtw.json").at("file").get<std::string>();
  }
  if (!fs::exists(file)) throw UserError("pattern graph " + file.string() + " is missing; run `htvgnn dtw` first");
  PatternGraph g;
  g.file = file;
  g.hash = hash_file(file);
  g.adjacency = as_matrix(load_packed(file));
  return g;
}

TrainingData training_data(const Prepared& p, const PatternGraph& g) {
  GraphSet graphs{p.topology, g.adjacency, p.dataset.nodes()};
  return make_training_data(p.dataset, graphs, p.ratios, p.history, p.horizon);
}

ModelConfig resolve_config(const std::string& name, const Prepared& p) {
  ModelConfig c = preset(name);
  const std::size_t n = p.dataset.nodes();
  if (name == "synthetic") {
    c.nodes = n;
  } else if (c.nodes != n) {
    throw UserError("preset " + name + " expects " + std::to_string(c.nodes) + " nodes but the prepared data has " +
                    std::to_string(n));
  }
  c.channels = p.dataset.channels();
  c.steps_per_day = p.dataset.samples_per_day;
  c.history = p.history;
  c.horizon = p.horizon;
  c.validate();
  return c;
}

json flags_json(Ablation a) {
  const AblationFlags f = flags_for(a);
  return {{"mask_embeddings", f.mask_embeddings},
          {"attention", f.attention},
          {"static_graphs", to_string(f.static_graphs)},
          {"dynamic_graphs", f.dynamic_graphs},
          {"recurrent", f.recurrent}};
}

// ---------------------------------------------------------------- commands

struct PrepareArgs {
  std::string data;
  std::string layout = "csv_grid";
  std::string ratios = "0.6,0.2,0.2";
  std::size_t history = 12;
  std::size_t horizon = 12;
  std::string edges;
  bool directed = false;
  std::optional<int> interval;
  int start_dow = 0;
  std::size_t channels = 1;
  std::size_t nodes = 8;
  std::size_t days = 4;
  std::uint64_t seed = 1;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  const SplitRatios ratios = parse_ratios(a.ratios);
  const bool synthetic = a.data == "synthetic";
  const int interval = a.interval.value_or(synthetic ? 30 : 5);

  ContentHash key;
  std::ostringstream settings;
  settings << "ratios=" << ratios.train << "," << ratios.val << "," << ratios.test << ";T=" << a.history
           << ";tau=" << a.horizon << ";interval=" << interval << ";dow=" << a.start_dow;
  if (synthetic) {
    settings << ";" << kSyntheticVersion << ";nodes=" << a.nodes << ";days=" << a.days << ";seed=" << a.seed;
  } else {
    if (!fs::exists(a.data)) throw UserError("data file " + a.data + " does not exist");
    settings << ";layout=" << (parse_layout(a.layout) == Layout::csv_grid ? "csv_grid" : "packed_binary") << ";channels=" << a.channels
             << ";data=" << hash_file(a.data);
    if (!a.edges.empty()) settings << ";edges=" << hash_file(a.edges) << ";directed=" << a.directed;
  }
  key.update(std::string_view(settings.str()));
  const std::string name = "prepared_" + key.hex();
  const fs::path dir = cache_root() / name;

  if (fs::exists(dir / "manifest.json")) {
    err << "cache hit: " << dir.string() << "\n";
  } else {
    SeriesDataset ds;
    Tensor topology;
    if (synthetic) {
      SynthOptions so;
      so.nodes = a.nodes;
      so.days = a.days;
      so.seed = a.seed;
      so.interval_minutes = interval;
      so.start_day_of_week = a.start_dow;
      SyntheticNetwork net = synth_network(so);
      ds = std::move(net.data);
      topology = net.a_topo;
    } else {
      LoadOptions lo;
      lo.layout = parse_layout(a.layout);
      lo.channels = a.channels;
      lo.interval_minutes = interval;
      lo.start_day_of_week = a.start_dow;
      ds = load_series(a.data, lo);
      if (a.edges.empty()) {
        err << "note: no --edges given; the road topology holds self-loops only\n";
        topology = build_topology({}, ds.nodes(), false);
      } else {
        topology = build_topology(load_edges_csv(a.edges), ds.nodes(), a.directed);
      }
    }
    // Windowing and normalization errors surface here, before anything is written.
    TrainingData td = make_training_data(ds, GraphSet{topology, build_topology({}, ds.nodes(), false), ds.nodes()},
                                         ratios, a.history, a.horizon);
    fs::create_directories(dir);
    save_packed(dir / "values.bin", ds.values);
    save_packed(dir / "topology.bin", as_packed(topology));
    const std::vector<Partition> parts = partition_series(ds.steps(), ratios);
    const char* split_names[] = {"train", "val", "test"};
    const WindowSet* windows[] = {&td.splits.train, &td.splits.val, &td.splits.test};
    json splits = json::object();
    for (std::size_t s = 0; s < 3; ++s) {
      const Partition& part = parts[s];
      const std::size_t row = ds.nodes() * ds.channels();
      std::vector<double> slice(td.normalized.data().begin() + static_cast<std::ptrdiff_t>(part.begin * row),
                                td.normalized.data().begin() + static_cast<std::ptrdiff_t>(part.end * row));
      const std::string file = std::string(split_names[s]) + ".bin";
      save_packed(dir / file, Tensor({part.size(), ds.nodes(), ds.channels()}, std::move(slice)));
      splits[split_names[s]] = {{"file", file},
                                {"begin", part.begin},
                                {"end", part.end},
                                {"windows", windows[s]->anchors.size()}};
    }
    json m = {{"hash", key.hex()},
              {"source", synthetic ? std::string(kSyntheticVersion) : fs::absolute(a.data).string()},
              {"settings", settings.str()},
              {"steps", ds.steps()},
              {"nodes", ds.nodes()},
              {"channels", ds.channels()},
              {"interval_minutes", ds.interval_minutes},
              {"samples_per_day", ds.samples_per_day},
              {"start_day_of_week", ds.start_day_of_week},
              {"ratios", {ratios.train, ratios.val, ratios.test}},
              {"history", a.history},
              {"horizon", a.horizon},
              {"mean", td.dataset.mean},
              {"std", td.dataset.std},
              {"values_hash", hash_values(ds.values)},
              {"splits", splits}};
    // Manifest last: its presence marks a complete cache entry.
    write_json(dir / "manifest.json", m);
    err << "prepared " << dir.string() << "\n";
  }
  write_json(latest_pointer(), {{"prepared", name}});
  const json m = read_json(dir / "manifest.json");
  out << "prepared " << name << ": " << m.at("steps") << " steps, " << m.at("nodes") << " nodes, "
      << m.at("channels") << " channels; windows train " << m.at("splits").at("train").at("windows") << ", val "
      << m.at("splits").at("val").at("windows") << ", test " << m.at("splits").at("test").at("windows") << "\n";
  return 0;
}

int cmd_dtw(const std::string& prepared, double sparsity, std::ostream& out, std::ostream& err) {
  const Prepared p = load_prepared(prepared);
  const std::string file = "dtw_" + dtw_key(p, sparsity) + ".bin";
  const fs::path path = p.dir / file;
  if (fs::exists(path)) {
    err << "cache hit: " << path.string() << "\n";
  } else {
    const Tensor g = build_pattern_graph(p.dataset, sparsity, p.ratios.train);
    save_packed(path, as_packed(g));
    err << "wrote " << path.string() << "\n";
  }
  write_json(p.dir / "dtw.json", {{"file", file}, {"sparsity", sparsity}});
  const Tensor g = as_matrix(load_packed(path));
  const std::size_t n = g.dim(0);
  std::size_t edges = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) edges += (i != j && g.data()[i * n + j] != 0.0) ? 1 : 0;
  }
  out << "pattern graph " << file << ": " << n << " nodes, " << edges << " directed edges at sparsity " << sparsity
      << "\n";
  return 0;
}

struct TrainArgs {
  std::string prepared;
  std::optional<double> sparsity;
  std::string preset = "synthetic";
  std::string ablation = "full";
  std::uint64_t seed = 1;
  std::size_t epochs = 100;
  std::size_t patience = 15;
  double lr = 1e-3;
  std::string out;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const Prepared p = load_prepared(a.prepared);
  const PatternGraph g = load_pattern_graph(p, a.sparsity);
  const ModelConfig config = resolve_config(a.preset, p);
  const Ablation ablation = parse_ablation(a.ablation);
  const TrainingData data = training_data(p, g);

  const fs::path dir = a.out;
  fs::create_directories(dir);
  RunManifest rm;
  rm.preset = a.preset;
  rm.config_text = config.to_text();
  rm.ablation = to_string(ablation);
  rm.flags = flags_json(ablation);
  rm.seed = a.seed;
  rm.epochs = a.epochs;
  rm.patience = a.patience;
  rm.learning_rate = a.lr;
  rm.prepared_dir = fs::absolute(p.dir).lexically_normal().string();
  rm.prepared_hash = p.manifest.at("hash").get<std::string>();
  rm.values_hash = p.manifest.at("values_hash").get<std::string>();
  rm.dtw_file = fs::absolute(g.file).lexically_normal().string();
  rm.dtw_hash = g.hash;
  rm.checkpoint = "checkpoint.bin";
  rm.metric_log = "metrics.csv";

  ModelParams params = init_params(config, a.seed);
  TrainOptions o;
  o.epochs = a.epochs;
  o.patience = a.patience;
  o.adam.lr = a.lr;
  o.seed = a.seed;
  o.checkpoint_path = dir / rm.checkpoint;
  o.log_path = dir / rm.metric_log;
  o.on_epoch = [&err](const EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %3zu  train loss %.4f  val mae %.4f%s\n", r.epoch, r.train_loss,
                  r.val.overall.mae, r.improved ? "  *" : "");
    err << line;
  };
  const TrainResult result = train(config, ablation, params, data, o);
  if (!fs::exists(o.checkpoint_path)) save_checkpoint(o.checkpoint_path, config, ablation, data.context.normalizer, params);

  rm.epochs_run = result.history.size();
  rm.best_epoch = result.state.best_epoch;
  rm.stopped_early = result.stopped_early;
  rm.aborted = result.aborted;
  write_json(dir / "manifest.json", rm.to_json());

  if (result.aborted) {
    err << "training aborted: " << result.abort_reason << "; kept the checkpoint of epoch " << rm.best_epoch << "\n";
    return 2;
  }
  const MetricReport val = evaluate(params, config, ablation, data, data.splits.val);
  out << config.name << ", validation split, best epoch " << rm.best_epoch << "\n"
      << format_report_table(val, rm.ablation + " seed " + std::to_string(a.seed));
  return 0;
}

// A trained model plus the data it is evaluated on.
struct LoadedRun {
  Checkpoint checkpoint;
  TrainingData data;
};

LoadedRun load_run(const std::string& run_dir, const std::string& checkpoint_path, const std::string& prepared,
                   std::optional<double> sparsity) {
  if (run_dir.empty() == checkpoint_path.empty()) throw UserError("give exactly one of --run or --checkpoint");
  fs::path ckpt = checkpoint_path;
  std::string prep = prepared;
  std::optional<fs::path> dtw_file;
  if (!run_dir.empty()) {
    const fs::path manifest = fs::path(run_dir) / "manifest.json";
    if (!fs::exists(manifest)) throw UserError("no run manifest in " + run_dir + "; run `htvgnn train --out " + run_dir + "` first");
    const RunManifest rm = RunManifest::from_json(read_json(manifest));
    ckpt = fs::path(run_dir) / rm.checkpoint;
    if (prep.empty()) prep = rm.prepared_dir;
    if (!sparsity) dtw_file = rm.dtw_file;
  }
  if (!fs::exists(ckpt)) throw UserError("checkpoint " + ckpt.string() + " does not exist; run `htvgnn train` first");
  LoadedRun r;
  r.checkpoint = load_checkpoint(ckpt);
  const Prepared p = load_prepared(prep);
  PatternGraph g;
  if (dtw_file) {
    if (!fs::exists(*dtw_file)) throw UserError("pattern graph " + dtw_file->string() + " is missing; run `htvgnn dtw` first");
    g.file = *dtw_file;
    g.adjacency = as_matrix(load_packed(*dtw_file));
  } else {
    g = load_pattern_graph(p, sparsity);
  }
  r.data = training_data(p, g);
  const ModelConfig& c = r.checkpoint.config;
  if (c.nodes != p.dataset.nodes() || c.channels != p.dataset.channels() || c.history != p.history ||
      c.horizon != p.horizon || c.steps_per_day != p.dataset.samples_per_day) {
    throw UserError("checkpoint " + ckpt.string() + " was trained on differently shaped data than " + p.dir.string());
  }
  return r;
}

const WindowSet& split_named(const TrainingData& d, const std::string& name) {
  if (name == "train") return d.splits.train;
  if (name == "val") return d.splits.val;
  if (name == "test") return d.splits.test;
  throw UserError("unknown split '" + name + "' (expected train, val or test)");
}

struct EvalArgs {
  std::string run;
  std::string checkpoint;
  std::string prepared;
  std::optional<double> sparsity;
  std::string split = "test";
  std::string horizon_mode = "cumulative";
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  const HorizonMode mode = parse_horizon_mode(a.horizon_mode);
  const LoadedRun r = load_run(a.run, a.checkpoint, a.prepared, a.sparsity);
  const Checkpoint& c = r.checkpoint;
  const MetricReport report = evaluate(c.params, c.config, c.ablation, r.data, split_named(r.data, a.split),
                                       1e-3, mode);
  out << c.config.name << ", " << a.split << " split\n" << format_report_table(report, to_string(c.ablation));
  return 0;
}

struct ForecastArgs {
  std::string run;
  std::string checkpoint;
  std::string prepared;
  std::optional<double> sparsity;
  std::string split = "test";
  std::size_t window = 0;
  std::string out;
};

int cmd_forecast(const ForecastArgs& a, std::ostream& out, std::ostream& err) {
  const LoadedRun r = load_run(a.run, a.checkpoint, a.prepared, a.sparsity);
  const WindowSet& ws = split_named(r.data, a.split);
  if (a.window >= ws.anchors.size()) {
    throw UserError("--window " + std::to_string(a.window) + " is out of range; the " + a.split + " split has " +
                    std::to_string(ws.anchors.size()) + " windows");
  }
  const Checkpoint& c = r.checkpoint;
  const std::size_t anchor = ws.anchors[a.window];
  const Tensor pred = predict(c.params, c.config, c.ablation, r.data, std::span<const std::size_t>(&anchor, 1));
  const std::size_t tau = pred.dim(1), n = pred.dim(2), ch = pred.dim(3);
  save_packed(a.out, Tensor({tau, n, ch}, {pred.data().begin(), pred.data().end()}));
  err << "wrote " << a.out << "\n";
  out << "forecast of " << a.split << " window " << a.window << " (anchor " << anchor << "): [" << tau << ", " << n
      << ", " << ch << "] -> " << a.out << "\n";
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, std::ostream& out) {
  std::vector<Suite> suites;
  if (suite == "all") {
    suites = {Suite::gradcheck, Suite::invariants, Suite::oracles};
  } else {
    try {
      suites = {parse_suite(suite)};
    } catch (const std::invalid_argument& e) {
      throw UserError(e.what());
    }
  }
  bool ok = true;
  for (Suite s : suites) {
    const SuiteReport report = run_suite(s, seed);
    out << format_suite(report);
    ok = ok && report.passed();
  }
  return ok ? 0 : 2;
}

}  // namespace

json RunManifest::to_json() const {
  return {{"preset", preset},
          {"config", config_text},
          {"ablation", ablation},
          {"flags", flags},
          {"seed", seed},
          {"epochs", epochs},
          {"patience", patience},
          {"learning_rate", learning_rate},
          {"dataset",
           {{"prepared_dir", prepared_dir},
            {"prepared_hash", prepared_hash},
            {"values_hash", values_hash},
            {"dtw_file", dtw_file},
            {"dtw_hash", dtw_hash}}},
          {"artifacts", {{"checkpoint", checkpoint}, {"metric_log", metric_log}}},
          {"result",
           {{"epochs_run", epochs_run},
            {"best_epoch", best_epoch},
            {"stopped_early", stopped_early},
            {"aborted", aborted}}}};
}

RunManifest RunManifest::from_json(const json& j) {
  try {
    RunManifest m;
    m.preset = j.at("preset").get<std::string>();
    m.config_text = j.at("config").get<std::string>();
    m.ablation = j.at("ablation").get<std::string>();
    m.flags = j.at("flags");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.epochs = j.at("epochs").get<std::size_t>();
    m.patience = j.at("patience").get<std::size_t>();
    m.learning_rate = j.at("learning_rate").get<double>();
    const json& d = j.at("dataset");
    m.prepared_dir = d.at("prepared_dir").get<std::string>();
    m.prepared_hash = d.at("prepared_hash").get<std::string>();
    m.values_hash = d.at("values_hash").get<std::string>();
    m.dtw_file = d.at("dtw_file").get<std::string>();
    m.dtw_hash = d.at("dtw_hash").get<std::string>();
    m.checkpoint = j.at("artifacts").at("checkpoint").get<std::string>();
    m.metric_log = j.at("artifacts").at("metric_log").get<std::string>();
    const json& r = j.at("result");
    m.epochs_run = r.at("epochs_run").get<std::size_t>();
    m.best_epoch = r.at("best_epoch").get<std::size_t>();
    m.stopped_early = r.at("stopped_early").get<bool>();
    m.aborted = r.at("aborted").get<bool>();
    return m;
  } catch (const json::exception& e) {
    throw UserError(std::string("malformed run manifest: ") + e.what());
  }
}

fs::path cache_root() {
  const char* env = std::getenv("HTVGNN_CACHE_DIR");
  return env && *env ? fs::path(env) : fs::path(".htvgnn-cache");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Traffic forecasting with time-varying graphs"};
  app.name("htvgnn");
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* sp = app.add_subcommand("prepare", "Load, normalize, split and window a series");
  sp->add_option("--data", prep.data, "Series file, or 'synthetic'")->required();
  sp->add_option("--layout", prep.layout, "csv_grid or packed_binary")->capture_default_str();
  sp->add_option("--ratios", prep.ratios, "train,val,test fractions")->capture_default_str();
  sp->add_option("--T", prep.history, "History length")->capture_default_str();
  sp->add_option("--tau", prep.horizon, "Forecast horizon")->capture_default_str();
  sp->add_option("--edges", prep.edges, "Edge list CSV from,to,cost");
  sp->add_flag("--directed", prep.directed, "Treat edges as directed");
  sp->add_option("--interval", prep.interval, "Minutes per step (default 5, synthetic 30)");
  sp->add_option("--start-dow", prep.start_dow, "Day of week of the first step, 0 = Monday")->capture_default_str();
  sp->add_option("--channels", prep.channels, "Channels per node in csv_grid files")->capture_default_str();
  sp->add_option("--nodes", prep.nodes, "Synthetic node count")->capture_default_str();
  sp->add_option("--days", prep.days, "Synthetic day count")->capture_default_str();
  sp->add_option("--seed", prep.seed, "Synthetic generator seed")->capture_default_str();

  std::string dtw_prepared;
  double sparsity = 0.01;
  auto* sd = app.add_subcommand("dtw", "Build the DTW pattern graph of the prepared data");
  sd->add_option("--prepared", dtw_prepared, "Prepared cache directory (default: latest)");
  sd->add_option("--sparsity", sparsity, "Fraction of node pairs kept as edges")->capture_default_str();

  TrainArgs tr;
  auto* st = app.add_subcommand("train", "Train a model and write checkpoint, metric log and manifest");
  st->add_option("--prepared", tr.prepared, "Prepared cache directory (default: latest)");
  st->add_option("--sparsity", tr.sparsity, "Pattern graph sparsity (default: latest dtw run)");
  st->add_option("--preset", tr.preset, "pems03, pems04, pems07, pems08 or synthetic")->capture_default_str();
  st->add_option("--ablation", tr.ablation, "full, wo-tm, wo-cg, wo-bc, wo-etpmsa, wo-tv or wo-tr")
      ->capture_default_str();
  st->add_option("--seed", tr.seed, "Initialization and shuffling seed")->capture_default_str();
  st->add_option("--epochs", tr.epochs, "Maximum epochs")->capture_default_str();
  st->add_option("--patience", tr.patience, "Early-stopping patience, 0 disables")->capture_default_str();
  st->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  st->add_option("--out", tr.out, "Run directory")->required();

  EvalArgs ev;
  auto* se = app.add_subcommand("eval", "Print the horizon metric table of a trained model");
  se->add_option("--run", ev.run, "Run directory written by train");
  se->add_option("--checkpoint", ev.checkpoint, "Checkpoint file, evaluated on the latest prepared data");
  se->add_option("--prepared", ev.prepared, "Prepared cache directory");
  se->add_option("--sparsity", ev.sparsity, "Pattern graph sparsity");
  se->add_option("--split", ev.split, "train, val or test")->capture_default_str();
  se->add_option("--horizon-mode", ev.horizon_mode, "cumulative or single-step")->capture_default_str();

  ForecastArgs fc;
  auto* sf = app.add_subcommand("forecast", "Write the forecast of one window as packed_binary [tau, N, C]");
  sf->add_option("--run", fc.run, "Run directory written by train");
  sf->add_option("--checkpoint", fc.checkpoint, "Checkpoint file, used with the latest prepared data");
  sf->add_option("--prepared", fc.prepared, "Prepared cache directory");
  sf->add_option("--sparsity", fc.sparsity, "Pattern graph sparsity");
  sf->add_option("--split", fc.split, "train, val or test")->capture_default_str();
  sf->add_option("--window", fc.window, "Window index within the split")->capture_default_str();
  sf->add_option("--out", fc.out, "Output file")->required();

  std::string suite = "all";
  std::uint64_t verify_seed = 1;
  auto* sv = app.add_subcommand("verify", "Run the built-in check suites");
  sv->add_option("--suite", suite, "gradcheck, invariants, oracles or all")->capture_default_str();
  sv->add_option("--seed", verify_seed, "Seed of the random instances")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (sp->parsed()) return cmd_prepare(prep, out, err);
    if (sd->parsed()) return cmd_dtw(dtw_prepared, sparsity, out, err);
    if (st->parsed()) return cmd_train(tr, out, err);
    if (se->parsed()) return cmd_eval(ev, out, err);
    if (sf->parsed()) return cmd_forecast(fc, out, err);
    if (sv->parsed()) return cmd_verify(suite, verify_seed, out);
  } catch (const UserError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IngestError& e) {
    err << "input error: " << e.what() << "\n";
    return 1;
  } catch (const WindowError& e) {
    err << "window error: " << e.what() << "\n";
    return 1;
  } catch (const NormalizationError& e) {
    err << "normalization error: " << e.what() << "\n";
    return 1;
  } catch (const GraphError& e) {
    err << "graph error: " << e.what() << "\n";
    return 1;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return 1;
  } catch (const DimensionError& e) {
    err << "shape error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace htvgnn::cli
