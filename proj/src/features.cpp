#include "dcprophet/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "dcprophet/error.hpp"
#include "dcprophet/parallel.hpp"
#include "dcprophet/text_io.hpp"

namespace dcprophet::features {

std::vector<double> pacf(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (max_lag == 0) throw std::invalid_argument("max_lag must be at least 1");
  if (n <= max_lag + 1) {
    throw InsufficientDataError("pacf needs more than " + std::to_string(max_lag + 1) +
                                " samples, got " + std::to_string(n));
  }
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi) throw ZeroVarianceError();

  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  std::vector<double> centered(n);
  for (std::size_t t = 0; t < n; ++t) centered[t] = series[t] - mean;

  // Biased autocorrelations r_0..r_max_lag.
  std::vector<double> r(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) acc += centered[t] * centered[t + k];
    r[k] = acc;
  }
  if (r[0] <= 0.0) throw ZeroVarianceError();
  for (std::size_t k = max_lag + 1; k-- > 0;) r[k] /= r[0];

  // Durbin-Levinson: phi holds the order-k AR coefficients phi_{k,1..k}.
  std::vector<double> out(max_lag);
  std::vector<double> phi(max_lag + 1, 0.0);
  std::vector<double> prev(max_lag + 1, 0.0);
  double v = 1.0;  // innovation variance relative to r_0
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double num = r[k];
    for (std::size_t j = 1; j < k; ++j) num -= prev[j] * r[k - j];
    const double kappa = v > 0.0 ? std::clamp(num / v, -1.0, 1.0) : 0.0;
    phi[k] = kappa;
    for (std::size_t j = 1; j < k; ++j) phi[j] = prev[j] - kappa * prev[k - j];
    v *= (1.0 - kappa * kappa);
    out[k - 1] = kappa;
    prev = phi;
  }
  return out;
}

double significance_band(std::size_t n) {
  return n == 0 ? 0.0 : 1.96 / std::sqrt(static_cast<double>(n));
}

std::vector<PacfResult> machine_pacf(const ingest::SeriesMap& series,
                                     const labeling::TrackMap* tracks, std::size_t max_lag,
                                     std::size_t threads) {
  std::vector<const ingest::MachineSeries*> machines;
  for (const auto& [id, s] : series) machines.push_back(&s);
  std::vector<std::vector<PacfResult>> per_machine(machines.size());

  parallel_for(machines.size(), threads, [&](std::size_t i) {
    const ingest::MachineSeries& s = *machines[i];
    const labeling::LabelTrack* track = nullptr;
    if (tracks) {
      if (const auto it = tracks->find(s.machine); it != tracks->end()) track = &it->second;
    }
    std::vector<double> values;
    for (const auto r : kAllResources) {
      values.clear();
      for (std::size_t t = 0; t < s.size(); ++t) {
        if (!s.present[t] || (track && track->downtime[t])) continue;
        values.push_back(s.intervals[t].avg(r));
      }
      try {
        PacfResult res;
        res.machine = s.machine;
        res.resource = r;
        res.pacf = pacf(values, max_lag);
        res.n_effective = values.size();
        per_machine[i].push_back(std::move(res));
      } catch (const ZeroVarianceError&) {
      } catch (const InsufficientDataError&) {
      }
    }
  });

  std::vector<PacfResult> out;
  for (auto& v : per_machine) {
    for (auto& r : v) out.push_back(std::move(r));
  }
  return out;
}

std::map<std::size_t, std::size_t> significant_lag_histogram(std::span<const PacfResult> results) {
  std::map<std::size_t, std::size_t> hist;
  for (const auto& res : results) {
    const double band = res.band();
    for (std::size_t k = 0; k < res.pacf.size(); ++k) {
      if (std::abs(res.pacf[k]) > band) ++hist[k + 1];
    }
  }
  return hist;
}

FeatureConfig::FeatureConfig(std::size_t lags) : lags_(lags) {
  if (lags == 0) throw std::invalid_argument("feature lags must be at least 1");
}

std::size_t FeatureConfig::index(const FeatureSlot& slot) const {
  if (slot.lag < 1 || slot.lag > lags_) throw std::out_of_range("lag outside 1..L");
  return static_cast<std::size_t>(slot.kind) * kResourceCount * lags_ +
         index_of(slot.resource) * lags_ + (slot.lag - 1);
}

FeatureSlot FeatureConfig::slot(std::size_t index) const {
  if (index >= dimension()) throw std::out_of_range("feature index outside layout");
  FeatureSlot s;
  s.kind = static_cast<ValueKind>(index / (kResourceCount * lags_));
  const std::size_t rest = index % (kResourceCount * lags_);
  s.resource = static_cast<ResourceKind>(rest / lags_);
  s.lag = rest % lags_ + 1;
  return s;
}

std::string FeatureConfig::name(std::size_t index) const {
  const FeatureSlot s = slot(index);
  return std::string(s.kind == ValueKind::Average ? "avg_" : "peak_") +
         std::string(resource_name(s.resource)) + "_lag" + std::to_string(s.lag);
}

nlohmann::json FeatureConfig::to_json() const {
  nlohmann::json j;
  j["format"] = "dcprophet-layout";
  j["version"] = 1;
  j["lags"] = lags_;
  j["resources"] = kResourceCount;
  j["dimension"] = dimension();
  j["formula"] = "index = kind * (resources * lags) + resource * lags + (lag - 1)";
  auto& slots = j["slots"];
  slots = nlohmann::json::array();
  for (std::size_t i = 0; i < dimension(); ++i) {
    const FeatureSlot s = slot(i);
    slots.push_back({{"index", i},
                     {"name", name(i)},
                     {"kind", s.kind == ValueKind::Average ? "avg" : "peak"},
                     {"resource", resource_name(s.resource)},
                     {"lag", s.lag}});
  }
  return j;
}

FeatureConfig FeatureConfig::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "dcprophet-layout") throw FormatError("not a layout file");
  FeatureConfig cfg(j.at("lags").get<std::size_t>());
  if (j.at("resources").get<std::size_t>() != kResourceCount ||
      j.at("dimension").get<std::size_t>() != cfg.dimension()) {
    throw FormatError("layout dimensions do not match this build");
  }
  return cfg;
}

std::optional<Instance> build_instance(const ingest::MachineSeries& series,
                                       const labeling::LabelTrack& track, std::size_t tau,
                                       const FeatureConfig& cfg) {
  const std::size_t lags = cfg.lags();
  if (tau < lags || tau >= series.size() || tau >= track.size()) return std::nullopt;
  for (std::size_t j = 1; j <= lags; ++j) {
    const std::size_t t = tau - j;
    if (!series.present[t] || track.downtime[t]) return std::nullopt;
  }
  Instance inst;
  inst.y = track.labels[tau];
  inst.machine = series.machine;
  inst.target = tau;
  inst.x.resize(cfg.dimension());
  for (std::size_t j = 1; j <= lags; ++j) {
    const IntervalUsage& u = series.intervals[tau - j];
    for (const auto r : kAllResources) {
      inst.x[cfg.index({ValueKind::Average, r, j})] = u.avg(r);
      inst.x[cfg.index({ValueKind::Peak, r, j})] = u.peak(r);
    }
  }
  return inst;
}

void DatasetConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
}

namespace {

bool by_key(const Instance& a, const Instance& b) {
  return a.machine != b.machine ? a.machine < b.machine : a.target < b.target;
}

struct MachineCandidates {
  std::vector<Instance> failures;
  std::vector<std::size_t> normal_targets;
};

}  // namespace

Dataset build_dataset(const ingest::SeriesMap& series, const labeling::TrackMap& tracks,
                      const FeatureConfig& cfg, const DatasetConfig& dcfg, std::size_t threads) {
  dcfg.validate();
  std::vector<const ingest::MachineSeries*> machines;
  for (const auto& [id, s] : series) {
    if (tracks.contains(id)) machines.push_back(&s);
  }

  std::vector<MachineCandidates> found(machines.size());
  parallel_for(machines.size(), threads, [&](std::size_t i) {
    const ingest::MachineSeries& s = *machines[i];
    const labeling::LabelTrack& track = tracks.at(s.machine);
    for (std::size_t tau = cfg.lags(); tau < s.size(); ++tau) {
      if (is_failure(track.labels[tau])) {
        if (auto inst = build_instance(s, track, tau, cfg)) found[i].failures.push_back(std::move(*inst));
        continue;
      }
      if (track.downtime[tau] || !s.present[tau]) continue;
      bool clean = true;
      for (std::size_t j = 1; j <= cfg.lags() && clean; ++j) {
        clean = s.present[tau - j] && !track.downtime[tau - j];
      }
      if (clean) found[i].normal_targets.push_back(tau);
    }
  });

  Dataset out;
  std::vector<Instance> failures;
  std::vector<std::pair<std::size_t, std::size_t>> candidates;  // (machine slot, tau)
  for (std::size_t i = 0; i < found.size(); ++i) {
    for (auto& f : found[i].failures) failures.push_back(std::move(f));
    for (const std::size_t tau : found[i].normal_targets) candidates.emplace_back(i, tau);
  }

  std::mt19937_64 rng(dcfg.rng_seed);
  std::size_t take = dcfg.normal_sample_count;
  if (candidates.size() < take) {
    out.warnings.push_back("only " + std::to_string(candidates.size()) +
                           " buildable normal instances, fewer than the " +
                           std::to_string(take) + " requested; using all of them");
    take = candidates.size();
  }
  // Partial Fisher-Yates: the first `take` slots become a uniform sample.
  for (std::size_t k = 0; k < take; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
    std::swap(candidates[k], candidates[pick(rng)]);
  }
  candidates.resize(take);
  std::sort(candidates.begin(), candidates.end());

  if (failures.empty()) out.warnings.push_back("no buildable failure instances; dataset holds normals only");

  std::array<std::vector<Instance>, kClassCount> by_class;
  for (auto& f : failures) by_class[to_label(f.y)].push_back(std::move(f));
  for (const auto& [slot, tau] : candidates) {
    const ingest::MachineSeries& s = *machines[slot];
    auto inst = build_instance(s, tracks.at(s.machine), tau, cfg);
    by_class[0].push_back(std::move(*inst));
  }

  for (auto& group : by_class) {
    std::sort(group.begin(), group.end(), by_key);
    std::shuffle(group.begin(), group.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(dcfg.train_fraction * static_cast<double>(group.size())));
    for (std::size_t k = 0; k < group.size(); ++k) {
      (k < n_train ? out.train : out.test).push_back(std::move(group[k]));
    }
  }
  std::sort(out.train.begin(), out.train.end(), by_key);
  std::sort(out.test.begin(), out.test.end(), by_key);
  return out;
}

LabeledData to_labeled(std::span<const Instance> instances) {
  LabeledData d;
  if (instances.empty()) return d;
  d.x = FeatureMatrix(instances.front().x.size());
  d.x.reserve_rows(instances.size());
  d.y.reserve(instances.size());
  for (const auto& inst : instances) {
    d.x.push_row(inst.x);
    d.y.push_back(inst.y);
  }
  return d;
}

void write_dataset(std::ostream& out, std::span<const Instance> instances, std::size_t dimension) {
  std::string line = "y";
  for (std::size_t i = 0; i < dimension; ++i) line += ",f" + std::to_string(i);
  out << line << '\n';
  for (const auto& inst : instances) {
    if (inst.x.size() != dimension) throw DimensionMismatch(dimension, inst.x.size());
    line = std::to_string(to_label(inst.y));
    for (const double v : inst.x) {
      line += ',';
      text::append_double(line, v);
    }
    line += '\n';
    out << line;
  }
}

std::vector<Instance> read_dataset(std::istream& in) {
  std::string line;
  if (!text::read_line(in, line) || !line.starts_with("y")) throw ParseError(1, "missing dataset header");
  const std::size_t dimension = text::split(line).size() - 1;
  std::vector<Instance> out;
  std::size_t line_no = 1;
  while (text::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = text::split(line);
    if (f.size() != dimension + 1) throw ParseError(line_no, "wrong field count");
    std::uint64_t y = 0;
    if (!text::parse_u64(f[0], y) || y > 3) throw ParseError(line_no, "bad label");
    Instance inst;
    inst.y = static_cast<FailureType>(y);
    inst.x.resize(dimension);
    for (std::size_t i = 0; i < dimension; ++i) {
      if (!text::parse_double(f[i + 1], inst.x[i])) throw ParseError(line_no, "bad feature value");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void write_keys(std::ostream& out, std::span<const Instance> instances) {
  out << "machine_id,interval\n";
  for (const auto& inst : instances) out << inst.machine << ',' << inst.target << '\n';
}

void read_keys(std::istream& in, std::vector<Instance>& instances) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t row = 0;
  while (text::read_line(in, line)) {
    ++line_no;
    if (line.empty() || line.starts_with("machine_id")) continue;
    const auto f = text::split(line);
    std::uint64_t machine = 0;
    std::uint64_t target = 0;
    if (f.size() != 2 || !text::parse_u64(f[0], machine) || !text::parse_u64(f[1], target)) {
      throw ParseError(line_no, "bad keys row");
    }
    if (row >= instances.size()) throw ParseError(line_no, "more keys than dataset rows");
    instances[row].machine = machine;
    instances[row].target = target;
    ++row;
  }
  if (row != instances.size()) throw FormatError("keys file has fewer rows than the dataset");
}

}  // namespace dcprophet::features
