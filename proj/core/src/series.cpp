// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/series.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace htvgnn {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(bytes, 8);
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

SeriesDataset load_csv(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t width = 0;
  std::size_t row_no = 0;
  const double missing = std::numeric_limits<double>::quiet_NaN();
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::size_t col = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const std::string cell = trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      ++col;
      if (cell.empty()) {
        row.push_back(missing);
      } else {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
          throw IngestError(path.string() + ": unparseable number '" + cell + "' at row " + std::to_string(row_no) +
                            ", column " + std::to_string(col));
        }
        row.push_back(v);
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (width == 0) {
      width = row.size();
    } else if (row.size() != width) {
      throw IngestError(path.string() + ": ragged row " + std::to_string(row_no) + " has " +
                        std::to_string(row.size()) + " columns, expected " + std::to_string(width));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IngestError(path.string() + ": no data rows");
  if (options.channels == 0 || width % options.channels != 0) {
    throw IngestError(path.string() + ": " + std::to_string(width) + " columns do not split into " +
                      std::to_string(options.channels) + " channels per node");
  }
  const std::size_t steps = rows.size();
  std::vector<double> values(steps * width);
  for (std::size_t c = 0; c < width; ++c) {
    double last = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      double v = rows[t][c];
      if (std::isnan(v)) {
        v = last;
      } else {
        last = v;
      }
      values[t * width + c] = v;
    }
  }
  SeriesDataset ds;
  ds.values = Tensor({steps, width / options.channels, options.channels}, std::move(values));
  return ds;
}

}  // namespace

Layout parse_layout(const std::string& name) {
  if (name == "csv_grid" || name == "csv") return Layout::csv_grid;
  if (name == "packed_binary" || name == "bin") return Layout::packed_binary;
  throw ContractError("unknown layout '" + name + "' (expected csv_grid or packed_binary)");
}

void SeriesDataset::validate() const {
  if (interval_minutes <= 0 || samples_per_day * static_cast<std::size_t>(interval_minutes) != 1440) {
    throw ContractError("samples per day times interval must equal 1440 minutes");
  }
  if (start_day_of_week < 0 || start_day_of_week > 6) throw ContractError("start day of week must be in 0..6");
}

SeriesDataset load_series(const std::filesystem::path& path, const LoadOptions& options) {
  if (options.interval_minutes <= 0 || 1440 % options.interval_minutes != 0) {
    throw ContractError("interval must divide a day evenly");
  }
  SeriesDataset ds;
  if (options.layout == Layout::csv_grid) {
    ds = load_csv(path, options);
  } else {
    ds.values = load_packed(path);
  }
  ds.interval_minutes = options.interval_minutes;
  ds.samples_per_day = static_cast<std::size_t>(1440 / options.interval_minutes);
  ds.start_day_of_week = options.start_day_of_week;
  ds.validate();
  return ds;
}

void save_packed(const std::filesystem::path& path, const Tensor& values) {
  if (values.rank() != 3) throw ContractError("packed_binary stores rank-3 tensors, got " + shape_str(values.shape()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write " + path.string());
  for (auto d : values.shape()) put_u64(out, d);
  for (double v : values.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw IngestError("write failed for " + path.string());
}

Tensor load_packed(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 24) throw IngestError(path.string() + ": truncated header");
  Shape shape(3);
  for (int i = 0; i < 3; ++i) shape[static_cast<std::size_t>(i)] = get_u64(bytes.data() + 8 * i);
  for (auto d : shape) {
    if (d == 0) throw IngestError(path.string() + ": zero extent in header " + shape_str(shape));
  }
  const std::size_t n = shape_numel(shape);
  if (bytes.size() != 24 + 8 * n) {
    throw IngestError(path.string() + ": header " + shape_str(shape) + " expects " + std::to_string(24 + 8 * n) +
                      " bytes, file has " + std::to_string(bytes.size()));
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = std::bit_cast<double>(get_u64(bytes.data() + 24 + 8 * i));
    if (!std::isfinite(values[i])) throw IngestError(path.string() + ": non-finite value at element " + std::to_string(i));
  }
  return Tensor(std::move(shape), std::move(values));
}

Tensor Normalizer::transform(const Tensor& raw) const {
  const std::size_t c = raw.dim(-1);
  if (c != mean.size() || c != std.size()) throw DimensionError("normalizer channel count mismatch");
  std::vector<double> out(raw.data().begin(), raw.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - mean[i % c]) / std[i % c];
  return Tensor(raw.shape(), std::move(out));
}

Tensor Normalizer::inverse(const Tensor& normalized) const {
  const std::size_t c = normalized.dim(-1);
  if (c != mean.size() || c != std.size()) throw DimensionError("normalizer channel count mismatch");
  std::vector<double> out(normalized.data().begin(), normalized.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * std[i % c] + mean[i % c];
  return Tensor(normalized.shape(), std::move(out));
}

Tensor zscore_fit_transform(SeriesDataset& ds, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ContractError("train fraction must lie in (0, 1)");
  const std::size_t steps = ds.steps();
  const std::size_t train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(steps) + 1e-9));
  if (train == 0) throw NormalizationError("training partition is empty");
  const std::size_t c = ds.channels();
  const std::size_t per_step = ds.nodes() * c;
  const auto v = ds.values.data();
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  const double count = static_cast<double>(train * ds.nodes());
  for (std::size_t i = 0; i < train * per_step; ++i) mean[i % c] += v[i];
  for (auto& m : mean) m /= count;
  for (std::size_t i = 0; i < train * per_step; ++i) var[i % c] += (v[i] - mean[i % c]) * (v[i] - mean[i % c]);
  std::vector<double> sd(c);
  for (std::size_t k = 0; k < c; ++k) {
    sd[k] = std::sqrt(var[k] / count);
    if (!(sd[k] > 0.0)) {
      throw NormalizationError("channel " + std::to_string(k) + " has zero standard deviation on the training partition");
    }
  }
  ds.mean = mean;
  ds.std = sd;
  return normalizer_of(ds).transform(ds.values);
}

Normalizer normalizer_of(const SeriesDataset& ds) {
  if (ds.mean.size() != ds.channels() || ds.std.size() != ds.channels()) {
    throw ContractError("dataset has no normalization statistics");
  }
  return Normalizer{ds.mean, ds.std};
}

std::vector<Partition> partition_series(std::size_t steps, const SplitRatios& ratios) {
  const double total = ratios.train + ratios.val + ratios.test;
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0 || std::fabs(total - 1.0) > 1e-9) {
    throw ContractError("split ratios must be positive and sum to 1");
  }
  const double s = static_cast<double>(steps);
  const auto train_end = static_cast<std::size_t>(std::floor(ratios.train * s + 1e-9));
  const auto val_end = static_cast<std::size_t>(std::floor((ratios.train + ratios.val) * s + 1e-9));
  return {{0, train_end}, {train_end, val_end}, {val_end, steps}};
}

Splits split_and_window(const SeriesDataset& ds, const SplitRatios& ratios, std::size_t history, std::size_t horizon) {
  if (history == 0 || horizon == 0) throw ContractError("history and horizon must be positive");
  const auto parts = partition_series(ds.steps(), ratios);
  const char* names[] = {"train", "validation", "test"};
  Splits splits;
  splits.history = history;
  splits.horizon = horizon;
  WindowSet* sets[] = {&splits.train, &splits.val, &splits.test};
  for (std::size_t k = 0; k < 3; ++k) {
    const Partition& p = parts[k];
    if (p.size() < history + horizon) {
      throw WindowError(std::string(names[k]) + " partition has " + std::to_string(p.size()) +
                        " steps, fewer than history + horizon = " + std::to_string(history + horizon));
    }
    sets[k]->partition = p;
    for (std::size_t t = p.begin + history - 1; t + horizon <= p.end - 1; ++t) sets[k]->anchors.push_back(t);
  }
  return splits;
}

std::size_t time_of_day(const SeriesDataset& ds, std::size_t index) { return index % ds.samples_per_day; }

std::size_t day_of_week(const SeriesDataset& ds, std::size_t index) {
  return (static_cast<std::size_t>(ds.start_day_of_week) + index / ds.samples_per_day) % 7;
}

ForecastBatch make_batch(const SeriesDataset& ds, const Tensor& normalized, std::span<const std::size_t> anchors,
                         std::size_t history, std::size_t horizon) {
  if (anchors.empty()) throw ContractError("empty batch");
  const std::size_t b = anchors.size();
  const std::size_t per_step = ds.nodes() * ds.channels();
  std::vector<double> x(b * history * per_step), y(b * horizon * per_step);
  ForecastBatch batch;
  batch.anchors.assign(anchors.begin(), anchors.end());
  const auto norm = normalized.data();
  const auto raw = ds.values.data();
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t t = anchors[i];
    if (t + 1 < history || t + horizon >= ds.steps()) throw WindowError("window anchored at " + std::to_string(t) + " leaves the series");
    for (std::size_t k = 0; k < history; ++k) {
      const std::size_t src = t + 1 - history + k;
      std::copy_n(norm.begin() + static_cast<std::ptrdiff_t>(src * per_step), per_step,
                  x.begin() + static_cast<std::ptrdiff_t>((i * history + k) * per_step));
      batch.tod.push_back(time_of_day(ds, src));
      batch.dow.push_back(day_of_week(ds, src));
    }
    for (std::size_t k = 0; k < horizon; ++k) {
      const std::size_t src = t + 1 + k;
      std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(src * per_step), per_step,
                  y.begin() + static_cast<std::ptrdiff_t>((i * horizon + k) * per_step));
    }
  }
  batch.x = Tensor({b, history, ds.nodes(), ds.channels()}, std::move(x));
  batch.y = Tensor({b, horizon, ds.nodes(), ds.channels()}, std::move(y));
  return batch;
}

}  // namespace htvgnn
