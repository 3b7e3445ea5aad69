#include "dcprophet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dcprophet/error.hpp"
#include "dcprophet/text_io.hpp"

namespace dcprophet::eval {
namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw std::invalid_argument("length mismatch: " + std::to_string(a) + " vs " +
                                std::to_string(b));
  }
}

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string show(const std::optional<double>& v) {
  return v ? text::format_double(*v) : std::string("undefined");
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (const auto& row : counts_) sum += std::accumulate(row.begin(), row.end(), std::uint64_t{0});
  return sum;
}

std::uint64_t ConfusionMatrix::predicted_total(FailureType c) const {
  const auto& row = counts_[to_label(c)];
  return std::accumulate(row.begin(), row.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::actual_total(FailureType c) const {
  std::uint64_t sum = 0;
  for (const auto& row : counts_) sum += row[to_label(c)];
  return sum;
}

ConfusionMatrix confusion(std::span<const FailureType> predicted,
                          std::span<const FailureType> actual) {
  check_lengths(predicted.size(), actual.size());
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) cm.add(predicted[i], actual[i]);
  return cm;
}

PrecisionRecall precision_recall(const ConfusionMatrix& cm, FailureType c) {
  const auto hit = cm.at(c, c);
  return {ratio(hit, cm.predicted_total(c)), ratio(hit, cm.actual_total(c))};
}

PrecisionRecall binary_precision_recall(const ConfusionMatrix& cm) {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t p = 0; p < kClassCount; ++p) {
    for (std::size_t a = 0; a < kClassCount; ++a) {
      const auto n = cm.at(static_cast<FailureType>(p), static_cast<FailureType>(a));
      const bool pred_fail = p != 0, act_fail = a != 0;
      if (pred_fail && act_fail) tp += n;
      else if (pred_fail) fp += n;
      else if (act_fail) fn += n;
    }
  }
  return {ratio(tp, tp + fp), ratio(tp, tp + fn)};
}

double f_beta(double precision, double recall, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (precision < 0.0 || precision > 1.0 || recall < 0.0 || recall > 1.0) {
    throw std::invalid_argument("precision and recall must lie in [0, 1]");
  }
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  if (den == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / den;
}

std::optional<double> f_beta(const PrecisionRecall& pr, double beta) {
  if (!pr.precision && !pr.recall) return std::nullopt;
  return f_beta(pr.precision.value_or(0.0), pr.recall.value_or(0.0), beta);
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  check_lengths(scores.size(), positive.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Each positive gains the negatives strictly below it plus half of the tied ones.
  double wins = 0.0;
  std::uint64_t neg_below = 0, n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? pos : neg)++;
      ++j;
    }
    wins += static_cast<double>(pos) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(neg));
    neg_below += neg;
    n_pos += pos;
    n_neg += neg;
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) throw UndefinedAucError();
  return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                std::span<const std::uint8_t> positive) {
  check_lengths(scores.size(), positive.size());
  const auto n_pos = static_cast<std::uint64_t>(std::count_if(
      positive.begin(), positive.end(), [](std::uint8_t p) { return p != 0; }));
  const std::uint64_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedAucError();

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> curve{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (positive[order[i]] ? tp : fp)++;
      ++i;
    }
    curve.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                     static_cast<double>(tp) / static_cast<double>(n_pos), threshold});
  }
  return curve;
}

void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve) {
  std::string buf = "fpr,tpr,threshold\n";
  for (const auto& p : curve) {
    text::append_double(buf, p.fpr);
    buf += ',';
    text::append_double(buf, p.tpr);
    buf += ',';
    text::append_double(buf, p.threshold);
    buf += '\n';
  }
  out << buf;
}

LatencyStats measure_latency(const std::function<void(std::span<const double>)>& predict,
                             std::span<const std::vector<double>> instances,
                             std::size_t repetitions) {
  if (instances.empty()) throw std::invalid_argument("latency needs at least one instance");
  if (repetitions == 0) throw std::invalid_argument("latency needs at least one repetition");
  for (const auto& x : instances) predict(x);

  using Clock = std::chrono::steady_clock;
  std::vector<double> ms(repetitions);
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto& x = instances[i % instances.size()];
    const auto t0 = Clock::now();
    predict(x);
    ms[i] = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  }
  LatencyStats stats;
  stats.calls = repetitions;
  stats.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(repetitions);
  std::sort(ms.begin(), ms.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(repetitions)));
  stats.p99_ms = ms[std::max<std::size_t>(rank, 1) - 1];
  stats.max_ms = ms.back();
  return stats;
}

MetricsReport make_report(std::span<const FailureType> predicted,
                          std::span<const FailureType> actual, std::span<const double> scores) {
  MetricsReport r;
  r.confusion = confusion(predicted, actual);
  for (std::size_t c = 0; c < kClassCount; ++c) {
    r.per_class[c] = precision_recall(r.confusion, static_cast<FailureType>(c));
  }
  r.binary = binary_precision_recall(r.confusion);
  r.binary_f3 = f_beta(r.binary);

  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 1; c < kClassCount; ++c) {
    if (r.confusion.actual_total(static_cast<FailureType>(c)) == 0) continue;
    sum += f_beta(r.per_class[c]).value_or(0.0);
    ++present;
  }
  if (present > 0) r.macro_f3 = sum / static_cast<double>(present);

  if (!scores.empty()) {
    check_lengths(scores.size(), actual.size());
    std::vector<std::uint8_t> pos(actual.size());
    for (std::size_t i = 0; i < actual.size(); ++i) pos[i] = is_failure(actual[i]) ? 1 : 0;
    const auto n_pos = std::count(pos.begin(), pos.end(), 1);
    if (n_pos > 0 && static_cast<std::size_t>(n_pos) < pos.size()) r.auc = roc_auc(scores, pos);
  }
  return r;
}

void write_report_text(std::ostream& out, const MetricsReport& report) {
  out << "instances: " << report.confusion.total() << "\n\n";
  out << "confusion (rows = predicted, columns = actual)\n";
  out << "           normal       IR       SR       FD\n";
  for (std::size_t p = 0; p < kClassCount; ++p) {
    std::string line(failure_type_name(static_cast<FailureType>(p)));
    line.resize(7, ' ');
    for (std::size_t a = 0; a < kClassCount; ++a) {
      std::string cell = std::to_string(
          report.confusion.at(static_cast<FailureType>(p), static_cast<FailureType>(a)));
      line += std::string(cell.size() < 9 ? 9 - cell.size() : 1, ' ') + cell;
    }
    out << line << '\n';
  }
  out << "\nper class: precision recall\n";
  for (std::size_t c = 0; c < kClassCount; ++c) {
    out << "  " << failure_type_name(static_cast<FailureType>(c)) << ": "
        << show(report.per_class[c].precision) << ' ' << show(report.per_class[c].recall) << '\n';
  }
  out << "\nfailure vs normal (IR, SR and FD pooled)\n";
  out << "  precision: " << show(report.binary.precision) << '\n';
  out << "  recall: " << show(report.binary.recall) << '\n';
  out << "  F3: " << show(report.binary_f3) << '\n';
  out << "macro F3 over failure classes present: " << show(report.macro_f3) << '\n';
  out << "AUC of the composite cascade score: " << show(report.auc) << '\n';
}

void write_report_kv(std::ostream& out, const MetricsReport& report) {
  out << "instances=" << report.confusion.total() << '\n';
  for (std::size_t p = 0; p < kClassCount; ++p) {
    for (std::size_t a = 0; a < kClassCount; ++a) {
      out << "confusion." << p << '.' << a << '='
          << report.confusion.at(static_cast<FailureType>(p), static_cast<FailureType>(a)) << '\n';
    }
  }
  for (std::size_t c = 0; c < kClassCount; ++c) {
    const std::string name(failure_type_name(static_cast<FailureType>(c)));
    out << "precision." << name << '=' << show(report.per_class[c].precision) << '\n';
    out << "recall." << name << '=' << show(report.per_class[c].recall) << '\n';
  }
  out << "binary.precision=" << show(report.binary.precision) << '\n';
  out << "binary.recall=" << show(report.binary.recall) << '\n';
  out << "binary.f3=" << show(report.binary_f3) << '\n';
  out << "macro.f3=" << show(report.macro_f3) << '\n';
  out << "auc=" << show(report.auc) << '\n';
}

void write_latency_kv(std::ostream& out, const LatencyStats& latency) {
  out << "latency.calls=" << latency.calls << '\n';
  out << "latency.mean_ms=" << text::format_double(latency.mean_ms) << '\n';
  out << "latency.p99_ms=" << text::format_double(latency.p99_ms) << '\n';
  out << "latency.max_ms=" << text::format_double(latency.max_ms) << '\n';
}

}  // namespace dcprophet::eval
