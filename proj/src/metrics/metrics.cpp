#include "lipgate/metrics.hpp"

#include "lipgate/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lipgate {

double mae(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("mae: sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  if (a.empty()) throw InvalidArgument("mae of empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double mae(const Image& a, const Image& b) {
  if (a.n != b.n) throw ShapeError("mae: image sides differ");
  return mae(a.pixels, b.pixels);
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && xs[order[j]] == xs[order[i]]) ++j;
    // positions i..j-1 (0-based) share rank mean of (i+1 .. j)
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = r;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("pearson: lengths differ");
  if (xs.size() < 2) throw InvalidArgument("pearson needs at least two points");
  const auto n = static_cast<long double>(xs.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double dx = xs[i] - mx;
    const long double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw UndefinedCorrelationError("correlation undefined: zero variance");
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("spearman: lengths differ");
  if (xs.size() < 3) throw InvalidArgument("spearman needs at least three points");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level outside [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return v[lo] + t * (v[hi] - v[lo]);
}

std::string_view to_string(Label l) { return l == Label::Id ? "id" : "ood"; }

Label parse_label(std::string_view text) {
  if (text == "id") return Label::Id;
  if (text == "ood") return Label::Ood;
  throw FormatError("unknown label '" + std::string(text) + "'");
}

double pair_counting_auc(std::span<const double> scores_id, std::span<const double> scores_ood) {
  if (scores_id.empty() || scores_ood.empty()) throw InvalidArgument("AUC needs both classes");
  // Mann-Whitney via midranks of the pooled sample.
  std::vector<double> pooled(scores_ood.begin(), scores_ood.end());
  pooled.insert(pooled.end(), scores_id.begin(), scores_id.end());
  const auto ranks = average_ranks(pooled);
  long double rank_sum = 0;
  for (std::size_t i = 0; i < scores_ood.size(); ++i) rank_sum += ranks[i];
  const auto m = static_cast<long double>(scores_ood.size());
  const auto n = static_cast<long double>(scores_id.size());
  const long double u = rank_sum - m * (m + 1) / 2;
  return static_cast<double>(u / (m * n));
}

RocCurve roc_auc(std::span<const double> scores_id, std::span<const double> scores_ood) {
  if (scores_id.empty() || scores_ood.empty()) throw InvalidArgument("AUC needs both classes");
  struct Scored {
    double score;
    bool ood;
  };
  std::vector<Scored> all;
  all.reserve(scores_id.size() + scores_ood.size());
  for (double s : scores_id) all.push_back({s, false});
  for (double s : scores_ood) all.push_back({s, true});
  for (const auto& s : all)
    if (!std::isfinite(s.score)) throw InvalidArgument("AUC scores must be finite");
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });

  const auto n_id = static_cast<double>(scores_id.size());
  const auto n_ood = static_cast<double>(scores_ood.size());
  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t fp = 0, tp = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    const double t = all[i].score;
    while (i < all.size() && all[i].score == t) {
      (all[i].ood ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / n_id, static_cast<double>(tp) / n_ood});
  }
  // Trapezoids in integer units of 1/(2 n_id n_ood), so swapping the classes
  // gives exactly 1 - auc.
  std::uint64_t twice_area = 0;
  fp = tp = 0;
  i = 0;
  while (i < all.size()) {
    const double t = all[i].score;
    const std::size_t fp0 = fp, tp0 = tp;
    while (i < all.size() && all[i].score == t) {
      (all[i].ood ? tp : fp) += 1;
      ++i;
    }
    twice_area += static_cast<std::uint64_t>(fp - fp0) * (tp0 + tp);
  }
  const double area = static_cast<double>(twice_area) / (2.0 * n_id * n_ood);
  curve.auc = area;
  const double check = pair_counting_auc(scores_id, scores_ood);
  if (std::abs(check - area) > 1e-12)
    throw Error("AUC disagreement between threshold sweep (" + std::to_string(area) +
                ") and pair counting (" + std::to_string(check) + ")");
  return curve;
}

ReferralCurve referral_curve(std::span<const EvalRecord> records, std::size_t steps) {
  if (records.empty()) throw InvalidArgument("referral curve needs records");
  if (steps < 2) throw InvalidArgument("referral curve needs steps >= 2");
  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return records[a].lipschitz > records[b].lipschitz;
  });

  // suffix[k] sums the records that remain after removing the first k.
  std::vector<long double> lip_suffix(n + 1, 0.0L), mae_suffix(n + 1, 0.0L);
  for (std::size_t k = n; k-- > 0;) {
    lip_suffix[k] = lip_suffix[k + 1] + records[order[k]].lipschitz;
    mae_suffix[k] = mae_suffix[k + 1] + records[order[k]].mae;
  }

  ReferralCurve c;
  c.total = n;
  for (std::size_t j = 0; j < steps; ++j) {
    const std::size_t removed = std::min(j * n / (steps - 1), n - 1);
    const auto kept = static_cast<long double>(n - removed);
    c.fractions.push_back(static_cast<double>(j) / static_cast<double>(steps - 1));
    c.referred.push_back(removed);
    c.mean_lip.push_back(static_cast<double>(lip_suffix[removed] / kept));
    c.mean_mae.push_back(static_cast<double>(mae_suffix[removed] / kept));
    c.max_lip.push_back(records[order[removed]].lipschitz);
  }
  return c;
}

GateThreshold select_threshold(const ReferralCurve& curve, double mae_limit) {
  const std::size_t s = curve.fractions.size();
  if (s == 0 || curve.mean_mae.size() != s || curve.max_lip.size() != s || curve.referred.size() != s)
    throw InvalidArgument("malformed referral curve");
  if (!std::isfinite(mae_limit)) throw InvalidArgument("mae_limit must be finite");
  for (std::size_t j = 0; j < s; ++j) {
    if (curve.mean_mae[j] <= mae_limit)
      return {curve.max_lip[j], mae_limit, curve.fractions[j], curve.referred[j]};
  }
  const double best = *std::min_element(curve.mean_mae.begin(), curve.mean_mae.end());
  throw InfeasibleThresholdError(best, "no referral fraction reaches mean MAE " +
                                           std::to_string(mae_limit) +
                                           "; minimum achievable is " + std::to_string(best));
}

std::vector<EvalRecord> fp_quadrant(std::span<const EvalRecord> records, double lip_max,
                                    double mae_min) {
  if (!std::isfinite(lip_max) || !std::isfinite(mae_min))
    throw InvalidArgument("fp_quadrant thresholds must be finite");
  std::vector<EvalRecord> out;
  for (const auto& r : records)
    if (r.lipschitz < lip_max && r.mae > mae_min) out.push_back(r);
  return out;
}

}  // namespace lipgate
