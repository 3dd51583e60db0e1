#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmlc/parallel.hpp"
#include "fmlc/raster.hpp"

namespace fmlc {

/// C x C tally; rows are classified (predicted) ids, columns reference ids.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
    if (classes == 0) throw InvalidInput("confusion matrix needs at least one class");
  }
  ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> row_major) : classes_(classes), counts_(std::move(row_major)) {
    if (classes == 0 || counts_.size() != classes * classes) {
      throw InvalidInput("confusion matrix payload must hold classes^2 counts");
    }
  }

  std::size_t classes() const noexcept { return classes_; }

  std::uint64_t& operator()(std::size_t predicted, std::size_t reference) noexcept {
    return counts_[predicted * classes_ + reference];
  }
  std::uint64_t operator()(std::size_t predicted, std::size_t reference) const noexcept {
    return counts_[predicted * classes_ + reference];
  }

  std::uint64_t row_total(std::size_t predicted) const noexcept {
    std::uint64_t s = 0;
    for (std::size_t c = 0; c < classes_; ++c) s += (*this)(predicted, c);
    return s;
  }
  std::uint64_t column_total(std::size_t reference) const noexcept {
    std::uint64_t s = 0;
    for (std::size_t r = 0; r < classes_; ++r) s += (*this)(r, reference);
    return s;
  }
  std::uint64_t total() const noexcept {
    std::uint64_t s = 0;
    for (auto v : counts_) s += v;
    return s;
  }
  std::uint64_t trace() const noexcept {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < classes_; ++i) s += (*this)(i, i);
    return s;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw InvalidInput("cannot add confusion matrices of different size");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }

  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Tallies pred vs truth. Pixels whose truth equals `ignore` are skipped.
/// Row bands are tallied independently and summed, so any thread count gives
/// the same integers.
inline ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& truth, std::optional<std::uint8_t> ignore = {},
                                 std::size_t threads = 1) {
  require_same_extent(pred, truth, "confusion");
  std::size_t classes = std::max(pred.legend.size(), truth.legend.size());
  std::uint8_t hi = 0;
  for (auto v : pred.values()) hi = std::max(hi, v);
  for (auto v : truth.values()) hi = std::max(hi, v);
  classes = std::max<std::size_t>(classes, std::size_t{hi} + 1);

  const std::size_t width = pred.width();
  const std::size_t bands = std::clamp<std::size_t>(threads, 1, pred.height());
  std::vector<ConfusionMatrix> partial(bands, ConfusionMatrix(classes));
  const std::size_t chunk = (pred.height() + bands - 1) / bands;
  parallel_rows(bands, bands, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t r0 = b * chunk;
      const std::size_t r1 = std::min(pred.height(), r0 + chunk);
      for (std::size_t i = r0 * width; i < r1 * width; ++i) {
        const std::uint8_t t = truth.at_pixel(i);
        if (ignore && t == *ignore) continue;
        ++partial[b](pred.at_pixel(i), t);
      }
    }
  });
  ConfusionMatrix cm(classes);
  for (const auto& p : partial) cm += p;
  return cm;
}

struct ClassMetrics {
  double dice = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double producer_acc = 0;
  double user_acc = 0;
  double weight = 0;  // share of reference pixels in this class
};

/// Undefined ratios (zero denominators) are quiet NaN.
struct MetricReport {
  std::vector<ClassMetrics> per_class;
  double overall_acc = 0;
  double kappa = 0;
  std::uint64_t total = 0;
};

inline MetricReport metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw InvalidInput("metrics: confusion matrix is all zeros");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  auto ratio = [&](double num, double den) { return den > 0 ? num / den : nan; };

  MetricReport rep;
  rep.total = total;
  const double n = static_cast<double>(total);
  double chance = 0.0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const double diag = static_cast<double>(cm(c, c));
    const double row = static_cast<double>(cm.row_total(c));
    const double col = static_cast<double>(cm.column_total(c));
    ClassMetrics m;
    m.precision = ratio(diag, row);
    m.recall = ratio(diag, col);
    // 2TP / (2TP + FP + FN) equals 2PR/(P+R) wherever the latter is defined.
    m.f1 = ratio(2.0 * diag, row + col);
    m.dice = m.f1;
    m.producer_acc = m.recall;
    m.user_acc = m.precision;
    m.weight = col / n;
    rep.per_class.push_back(m);
    chance += row * col;
  }
  const double po = static_cast<double>(cm.trace()) / n;
  const double pe = chance / (n * n);
  rep.overall_acc = po;
  rep.kappa = pe < 1.0 ? (po - pe) / (1.0 - pe) : nan;
  return rep;
}

namespace metrics_detail {
inline nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }
}  // namespace metrics_detail

inline nlohmann::json to_json(const MetricReport& r, const std::vector<std::string>& legend = {}) {
  using metrics_detail::number_or_null;
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    classes.push_back({{"id", c},
                       {"name", c < legend.size() ? legend[c] : "class_" + std::to_string(c)},
                       {"dice", number_or_null(m.dice)},
                       {"precision", number_or_null(m.precision)},
                       {"recall", number_or_null(m.recall)},
                       {"f1", number_or_null(m.f1)},
                       {"producer_acc", number_or_null(m.producer_acc)},
                       {"user_acc", number_or_null(m.user_acc)},
                       {"weight", m.weight}});
  }
  return {{"overall_acc", r.overall_acc}, {"kappa", number_or_null(r.kappa)}, {"total", r.total}, {"classes", classes}};
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < cm.classes(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < cm.classes(); ++c) row.push_back(cm(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& rows) {
  const std::size_t n = rows.size();
  std::vector<std::uint64_t> flat;
  for (const auto& row : rows) {
    if (row.size() != n) throw InvalidInput("confusion matrix JSON must be square");
    for (const auto& v : row) flat.push_back(v.get<std::uint64_t>());
  }
  return ConfusionMatrix(n, std::move(flat));
}

/// Confusion matrix with row/column totals, producer and user accuracy rows,
/// then overall accuracy and kappa.
inline void print_table(std::ostream& os, const ConfusionMatrix& cm, const MetricReport& r,
                        const std::vector<std::string>& legend = {}) {
  auto name = [&](std::size_t c) { return c < legend.size() ? legend[c] : "class_" + std::to_string(c); };
  auto pct = [](double v) {
    if (std::isnan(v)) return std::string("n/a");
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v;
    return s.str();
  };
  const int w = 14;
  os << std::left << std::setw(w) << "classified" << std::right;
  for (std::size_t c = 0; c < cm.classes(); ++c) os << std::setw(w) << name(c);
  os << std::setw(w) << "row_total" << std::setw(w) << "user_acc%" << '\n';
  for (std::size_t row = 0; row < cm.classes(); ++row) {
    os << std::left << std::setw(w) << name(row) << std::right;
    for (std::size_t c = 0; c < cm.classes(); ++c) os << std::setw(w) << cm(row, c);
    os << std::setw(w) << cm.row_total(row) << std::setw(w) << pct(r.per_class[row].user_acc) << '\n';
  }
  os << std::left << std::setw(w) << "column_total" << std::right;
  for (std::size_t c = 0; c < cm.classes(); ++c) os << std::setw(w) << cm.column_total(c);
  os << std::setw(w) << cm.total() << '\n';
  os << std::left << std::setw(w) << "producer_acc%" << std::right;
  for (std::size_t c = 0; c < cm.classes(); ++c) os << std::setw(w) << pct(r.per_class[c].producer_acc);
  os << '\n';
  os << "overall_accuracy% " << pct(r.overall_acc) << '\n';
  std::ostringstream k;
  k << std::fixed << std::setprecision(4) << r.kappa;
  os << "kappa " << (std::isnan(r.kappa) ? std::string("n/a") : k.str()) << '\n';
}

}  // namespace fmlc
