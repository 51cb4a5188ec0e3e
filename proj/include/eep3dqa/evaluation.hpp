// SPDX-License-Identifier: Apache-2.0
#pragma once

// Consistency criteria (SRCC, KRCC, PLCC, RMSE), five-parameter logistic mapping, and
// content-disjoint k-fold planning.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eep3dqa/error.hpp"
#include "eep3dqa/rng.hpp"

namespace eep3dqa {

namespace detail {

inline void require_paired(std::span<const double> a, std::span<const double> b, std::size_t min_n, const char* what) {
  if (a.size() != b.size()) throw Error(std::string(what) + ": length mismatch");
  if (a.size() < min_n) throw Error(std::string(what) + ": need at least " + std::to_string(min_n) + " samples");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw Error(std::string(what) + ": non-finite input");
  }
}

}  // namespace detail

// Fractional ranks (1-based); tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i + 1;
    while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 1);  // mean of i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = r;
    i = j;
  }
  return ranks;
}

inline double plcc(std::span<const double> a, std::span<const double> b) {
  detail::require_paired(a, b, 3, "plcc");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw Error("plcc: constant input (zero variance)");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double srcc(std::span<const double> a, std::span<const double> b) {
  detail::require_paired(a, b, 3, "srcc");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  try {
    return plcc(ra, rb);
  } catch (const Error&) {
    throw Error("srcc: constant input (zero rank variance)");
  }
}

// Kendall tau-b via Knight's O(n log n) algorithm: sort by (a, b), then count the swaps a
// merge sort on b needs; joint and per-vector ties come from runs in the sorted orders.
inline double krcc(std::span<const double> a, std::span<const double> b) {
  detail::require_paired(a, b, 3, "krcc");
  const std::size_t n = a.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });
  auto pairs = [](std::uint64_t t) { return t * (t - 1) / 2; };
  std::uint64_t ties_a = 0, ties_joint = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && a[idx[j]] == a[idx[i]]) ++j;
    ties_a += pairs(j - i);
    for (std::size_t k = i; k < j;) {
      std::size_t l = k + 1;
      while (l < j && b[idx[l]] == b[idx[k]]) ++l;
      ties_joint += pairs(l - k);
      k = l;
    }
    i = j;
  }
  std::vector<double> seq(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) seq[i] = b[idx[i]];
  std::uint64_t swaps = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (seq[i] <= seq[j]) {
          buf[k++] = seq[i++];
        } else {
          swaps += mid - i;
          buf[k++] = seq[j++];
        }
      }
      while (i < mid) buf[k++] = seq[i++];
      while (j < hi) buf[k++] = seq[j++];
    }
    std::swap(seq, buf);
  }
  std::uint64_t ties_b = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && seq[j] == seq[i]) ++j;
    ties_b += pairs(j - i);
    i = j;
  }
  const std::uint64_t total = pairs(n);
  if (ties_a == total || ties_b == total) throw Error("krcc: all-tied input");
  const double num = static_cast<double>(total) - static_cast<double>(ties_a) - static_cast<double>(ties_b) +
                     static_cast<double>(ties_joint) - 2.0 * static_cast<double>(swaps);
  const double den = std::sqrt(static_cast<double>(total - ties_a) * static_cast<double>(total - ties_b));
  return std::clamp(num / den, -1.0, 1.0);
}

inline double rmse(std::span<const double> a, std::span<const double> b) {
  detail::require_paired(a, b, 1, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------
// Five-parameter logistic: m(q) = b1 (1/2 - 1/(1 + exp(b2 (q - b3)))) + b4 q + b5

using LogisticParams = std::array<double, 5>;

inline double logistic5(const LogisticParams& p, double q) {
  return p[0] * (0.5 - 1.0 / (1.0 + std::exp(p[1] * (q - p[2])))) + p[3] * q + p[4];
}

struct LogisticFit {
  LogisticParams params{};
  std::vector<double> mapped;
  double rmse = 0.0;  // mapped vs mos
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // constant predictions; mapped is the constant mean(mos)
};

struct LogisticFitOptions {
  int max_iterations = 500;
  double step_tolerance = 1e-10;
  bool linear_start = true;  // also start from the least-squares line and keep the better fit
};

namespace detail {

// Solves the 5x5 system in place with partial pivoting; false when singular.
inline bool solve5(std::array<std::array<double, 5>, 5> a, std::array<double, 5> b, std::array<double, 5>& x) {
  for (int c = 0; c < 5; ++c) {
    int piv = c;
    for (int r = c + 1; r < 5; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (std::abs(a[piv][c]) < 1e-300) return false;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (int r = c + 1; r < 5; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 5; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (int r = 4; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 5; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

inline double logistic_sse(const LogisticParams& p, std::span<const double> q, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double r = logistic5(p, q[i]) - y[i];
    s += r * r;
  }
  return s;
}

// Levenberg-Marquardt with Marquardt diagonal scaling.
inline LogisticFit levenberg_marquardt(LogisticParams p, std::span<const double> q, std::span<const double> y,
                                       const LogisticFitOptions& opt) {
  LogisticFit fit;
  double cost = logistic_sse(p, q, y);
  double lambda = 1e-3;
  for (fit.iterations = 0; fit.iterations < opt.max_iterations; ++fit.iterations) {
    std::array<std::array<double, 5>, 5> jtj{};
    std::array<double, 5> jtr{};
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(p[1] * (q[i] - p[2])));
      const double ds = s * (1.0 - s);
      const std::array<double, 5> g = {0.5 - s, p[0] * ds * (q[i] - p[2]), -p[0] * ds * p[1], q[i], 1.0};
      const double r = logistic5(p, q[i]) - y[i];
      for (int a = 0; a < 5; ++a) {
        jtr[a] += g[a] * r;
        for (int b = 0; b < 5; ++b) jtj[a][b] += g[a] * g[b];
      }
    }
    double max_diag = 0.0;
    for (int a = 0; a < 5; ++a) max_diag = std::max(max_diag, jtj[a][a]);
    bool improved = false;
    while (lambda < 1e16) {
      auto aug = jtj;
      for (int a = 0; a < 5; ++a) aug[a][a] += lambda * std::max(jtj[a][a], 1e-12 * max_diag + 1e-300);
      std::array<double, 5> neg{}, delta{};
      for (int a = 0; a < 5; ++a) neg[a] = -jtr[a];
      if (solve5(aug, neg, delta)) {
        LogisticParams trial = p;
        for (int a = 0; a < 5; ++a) trial[a] += delta[a];
        const double trial_cost = logistic_sse(trial, q, y);
        if (std::isfinite(trial_cost) && trial_cost < cost) {
          double step = 0.0, norm = 0.0;
          for (int a = 0; a < 5; ++a) {
            step += delta[a] * delta[a];
            norm += p[a] * p[a];
          }
          p = trial;
          cost = trial_cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          improved = true;
          if (std::sqrt(step) <= opt.step_tolerance * (std::sqrt(norm) + opt.step_tolerance)) fit.converged = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!improved || fit.converged || cost == 0.0) {
      // No descent direction left at any damping: a (local) minimum.
      fit.converged = true;
      break;
    }
  }
  fit.params = p;
  return fit;
}

}  // namespace detail

inline LogisticFit logistic_fit(std::span<const double> pred, std::span<const double> mos,
                                const LogisticFitOptions& opt = {}) {
  detail::require_paired(pred, mos, 5, "logistic_fit");
  const auto n = static_cast<double>(pred.size());
  const auto [pmin, pmax] = std::minmax_element(pred.begin(), pred.end());
  const auto [mmin, mmax] = std::minmax_element(mos.begin(), mos.end());
  const double mos_mean = std::accumulate(mos.begin(), mos.end(), 0.0) / n;
  const double pred_range = *pmax - *pmin;

  LogisticFit best;
  if (pred_range <= 0.0) {
    best.degenerate = true;
    best.params = {0.0, 0.0, *pmin, 0.0, mos_mean};
    best.mapped.assign(pred.size(), mos_mean);
    best.rmse = rmse(best.mapped, mos);
    return best;
  }
  std::vector<double> sorted(pred.begin(), pred.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

  const LogisticParams standard = {*mmax - *mmin, 4.0 / pred_range, median, 0.0, mos_mean};
  best = detail::levenberg_marquardt(standard, pred, mos, opt);
  if (opt.linear_start) {
    const double pm = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      sxy += (pred[i] - pm) * (mos[i] - mos_mean);
      sxx += (pred[i] - pm) * (pred[i] - pm);
    }
    const double slope = sxy / sxx;
    const LogisticParams linear = {0.0, 4.0 / pred_range, median, slope, mos_mean - slope * pm};
    LogisticFit alt = detail::levenberg_marquardt(linear, pred, mos, opt);
    if (detail::logistic_sse(alt.params, pred, mos) < detail::logistic_sse(best.params, pred, mos)) {
      alt.iterations += best.iterations;
      best = alt;
    }
  }
  // The model family is closed under affine maps of its output (b1, b4, b5 scale; b5
  // shifts), so an exact affine refit never raises the error and leaves the fit
  // least-squares optimal with respect to scale and offset.
  std::vector<double> raw(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) raw[i] = logistic5(best.params, pred[i]);
  const double rm = std::accumulate(raw.begin(), raw.end(), 0.0) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    sxy += (raw[i] - rm) * (mos[i] - mos_mean);
    sxx += (raw[i] - rm) * (raw[i] - rm);
  }
  if (sxx > 0.0) {
    const double a = sxy / sxx;
    const double c = mos_mean - a * rm;
    LogisticParams refit = {a * best.params[0], best.params[1], best.params[2], a * best.params[3],
                            a * best.params[4] + c};
    if (detail::logistic_sse(refit, pred, mos) <= detail::logistic_sse(best.params, pred, mos)) best.params = refit;
  }
  best.mapped.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) best.mapped[i] = logistic5(best.params, pred[i]);
  best.rmse = rmse(best.mapped, mos);
  return best;
}

// ---------------------------------------------------------------------------

struct EvalReport {
  double srcc = 0.0;
  double plcc = 0.0;
  double krcc = 0.0;
  double rmse = 0.0;
  LogisticParams logistic{};
  std::size_t n = 0;
  bool logistic_converged = true;
};

// SRCC/KRCC on raw predictions; PLCC/RMSE after logistic mapping.
inline EvalReport evaluate_run(std::span<const double> pred, std::span<const double> mos) {
  detail::require_paired(pred, mos, 5, "evaluate_run");
  EvalReport r;
  r.n = pred.size();
  r.srcc = srcc(pred, mos);
  r.krcc = krcc(pred, mos);
  const LogisticFit fit = logistic_fit(pred, mos);
  if (fit.degenerate) throw Error("evaluate_run: degenerate logistic fit (constant predictions)");
  r.logistic = fit.params;
  r.logistic_converged = fit.converged;
  r.plcc = plcc(fit.mapped, mos);
  r.rmse = fit.rmse;
  return r;
}

// Arithmetic mean of every criterion; logistic parameters are averaged too and n summed.
inline EvalReport aggregate_folds(std::span<const EvalReport> reports) {
  if (reports.empty()) throw Error("aggregate_folds: no reports");
  EvalReport out;
  const auto k = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    out.srcc += r.srcc / k;
    out.plcc += r.plcc / k;
    out.krcc += r.krcc / k;
    out.rmse += r.rmse / k;
    for (int i = 0; i < 5; ++i) out.logistic[i] += r.logistic[i] / k;
    out.n += r.n;
    out.logistic_converged = out.logistic_converged && r.logistic_converged;
  }
  return out;
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"srcc", r.srcc},
          {"plcc", r.plcc},
          {"krcc", r.krcc},
          {"rmse", r.rmse},
          {"logistic", r.logistic},
          {"logistic_converged", r.logistic_converged},
          {"n", r.n}};
}

// Aligned text table in SRCC / PLCC / KRCC / RMSE column order.
inline std::string format_report_table(std::span<const std::string> labels, std::span<const EvalReport> reports) {
  detail::require(labels.size() == reports.size(), "format_report_table: label/report count mismatch");
  std::size_t width = 5;
  for (const auto& l : labels) width = std::max(width, l.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "label" << std::right;
  for (const char* h : {"SRCC", "PLCC", "KRCC", "RMSE"}) os << "  " << std::setw(8) << h;
  os << '\n' << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    os << std::left << std::setw(static_cast<int>(width)) << labels[i] << std::right;
    for (double v : {reports[i].srcc, reports[i].plcc, reports[i].krcc, reports[i].rmse}) os << "  " << std::setw(8) << v;
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Fold planning

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> assignments;  // item id -> fold
  std::map<std::string, std::string> group_key;    // item id -> group id

  std::size_t fold_of(const std::string& item) const { return assignments.at(item); }
};

struct FoldItem {
  std::string item_id;
  std::string group_id;
};

// Distinct groups (sorted, then shuffled by seed) are dealt round-robin to the k folds.
inline FoldPlan kfold_split(std::span<const FoldItem> items, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> groups;
  for (const auto& it : items) groups.push_back(it.group_id);
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  if (k < 2) throw ConfigError("fold count must be >= 2");
  if (k > groups.size()) {
    throw ConfigError("fold count " + std::to_string(k) + " exceeds distinct group count " +
                      std::to_string(groups.size()));
  }
  Rng rng(seed);
  for (std::size_t i = groups.size(); i > 1; --i) std::swap(groups[i - 1], groups[rng.uniform_index(i)]);
  std::map<std::string, std::size_t> group_fold;
  for (std::size_t i = 0; i < groups.size(); ++i) group_fold[groups[i]] = i % k;
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (const auto& it : items) {
    if (plan.assignments.count(it.item_id)) throw ConfigError("duplicate item id '" + it.item_id + "'");
    plan.assignments[it.item_id] = group_fold.at(it.group_id);
    plan.group_key[it.item_id] = it.group_id;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Dataset manifest: CSV rows "model_path,group_id,mos", optional header row.

struct DatasetItem {
  std::filesystem::path model_path;
  std::string group_id;
  double mos = 0.0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

}  // namespace detail

// Relative model paths resolve against the CSV's directory.
inline std::vector<DatasetItem> load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset manifest not found: '" + path.string() + "'");
  std::vector<DatasetItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cols = detail::split_csv_line(line);
    if (cols.size() == 1 && cols[0].empty()) continue;
    if (!cols.empty() && cols[0].rfind('#', 0) == 0) continue;
    if (line_no == 1 && !cols.empty() && cols[0] == "model_path") continue;
    if (cols.size() < 3) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected model_path,group_id,mos");
    }
    DatasetItem item;
    item.model_path = cols[0];
    if (item.model_path.is_relative()) item.model_path = path.parent_path() / item.model_path;
    item.group_id = cols[1];
    try {
      std::size_t used = 0;
      item.mos = std::stod(cols[2], &used);
      if (used != cols[2].size() || !std::isfinite(item.mos)) throw std::invalid_argument("mos");
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad mos '" + cols[2] + "'");
    }
    items.push_back(std::move(item));
  }
  if (items.empty()) throw ConfigError("dataset manifest '" + path.string() + "' has no rows");
  return items;
}

inline void save_dataset_csv(const std::filesystem::path& path, std::span<const DatasetItem> items) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset manifest '" + path.string() + "'");
  out << "model_path,group_id,mos\n";
  for (const auto& it : items) {
    // In-memory paths are relative to the working directory; the file stores them relative to itself.
    const std::filesystem::path p = std::filesystem::absolute(it.model_path)
                                        .lexically_relative(std::filesystem::absolute(path).parent_path());
    out << p.generic_string() << ',' << it.group_id << ',' << std::setprecision(17) << it.mos << '\n';
  }
}

}  // namespace eep3dqa
