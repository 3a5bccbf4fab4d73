#pragma once

// Evaluation statistics: reconstruction error, rank correlation, ROC/AUC for
// OOD detection, referral curves and threshold selection for the gate.

#include "lipgate/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace lipgate {

double mae(std::span<const double> a, std::span<const double> b);
double mae(const Image& a, const Image& b);

/// 1-based ranks; tied values share the average of their positions.
std::vector<double> average_ranks(std::span<const double> xs);

/// Throws UndefinedCorrelationError if either side has zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Pearson correlation of average ranks; needs equal lengths >= 3.
double spearman(std::span<const double> xs, std::span<const double> ys);

/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::span<const double> values, double q);

enum class Label { Id, Ood };
std::string_view to_string(Label l);
Label parse_label(std::string_view text);

struct EvalRecord {
  std::uint64_t sample_id = 0;
  Label label = Label::Id;
  double mae = 0.0;
  double lipschitz = 0.0;
  double variance = 0.0;

  bool operator==(const EvalRecord&) const = default;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) ... (1,1)
  double auc = 0.0;
};

/// Higher score means more likely OOD. The trapezoidal AUC is cross-checked
/// against the pair-counting statistic.
RocCurve roc_auc(std::span<const double> scores_id, std::span<const double> scores_ood);

/// Probability that a random OOD score beats a random ID score, ties counted 1/2.
double pair_counting_auc(std::span<const double> scores_id, std::span<const double> scores_ood);

struct ReferralCurve {
  std::vector<double> fractions;
  std::vector<double> mean_lip;
  std::vector<double> mean_mae;
  std::vector<double> max_lip;         // largest retained lipschitz
  std::vector<std::size_t> referred;   // records removed at each fraction
  std::size_t total = 0;
};

inline constexpr std::size_t kDefaultReferralSteps = 101;

/// Fraction j/(steps-1) removes floor(j*N/(steps-1)) records with the highest
/// lipschitz (at most N-1, so something is always retained).
ReferralCurve referral_curve(std::span<const EvalRecord> records,
                             std::size_t steps = kDefaultReferralSteps);

struct GateThreshold {
  double gamma = 0.0;
  double mae_limit = 0.0;
  double fraction = 0.0;
  std::size_t referred = 0;
};

/// Smallest fraction whose retained mean MAE is within mae_limit; gamma is the
/// retained maximum lipschitz there.
GateThreshold select_threshold(const ReferralCurve& curve, double mae_limit);

inline constexpr double kDefaultFpLipMax = 0.6;
inline constexpr double kDefaultFpMaeMin = 0.023;

/// Records with lipschitz < lip_max and mae > mae_min, in input order.
std::vector<EvalRecord> fp_quadrant(std::span<const EvalRecord> records,
                                    double lip_max = kDefaultFpLipMax,
                                    double mae_min = kDefaultFpMaeMin);

}  // namespace lipgate
