#ifndef SIGSPP_METRICS_HPP_
#define SIGSPP_METRICS_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sigspp/errors.hpp"

namespace sigspp {

enum class ForgeryClass { kRandom, kSimple, kSkilled };

ForgeryClass forgery_class_from_string(const std::string& s);
std::string to_string(ForgeryClass c);

// Decision scores for one writer; higher means more genuine.
struct WriterScores {
  std::vector<double> genuine;
  std::vector<double> random;
  std::vector<double> simple;
  std::vector<double> skilled;

  const std::vector<double>& forgeries(ForgeryClass c) const {
    switch (c) {
      case ForgeryClass::kRandom: return random;
      case ForgeryClass::kSimple: return simple;
      case ForgeryClass::kSkilled: return skilled;
    }
    throw ConfigError("bad forgery class");
  }
};

using ScoreSet = std::map<int, WriterScores>;

// Stepwise FRR/FAR over all distinct scores plus -inf/+inf sentinels:
//   FRR(t) = fraction of genuine scores <  t
//   FAR(t) = fraction of forgery scores >= t
struct FarFrrCurve {
  std::vector<double> thresholds;
  std::vector<double> frr;  // fractions in [0, 1]
  std::vector<double> far;
};

FarFrrCurve far_frr_curve(const std::vector<double>& genuine,
                          const std::vector<double>& forgery);

struct EerResult {
  double eer_percent = 0.0;
  double threshold = 0.0;
};

// EER at the FAR/FRR crossing; between breakpoints the two step functions
// are linearly interpolated.
EerResult eer_from_scores(const std::vector<double>& genuine,
                          const std::vector<double>& forgery);

// Pools every writer's scores and computes one EER at a global threshold.
EerResult eer_global(const ScoreSet& scores, ForgeryClass forgery_class);

struct EerUserResult {
  double eer_percent = 0.0;
  int writers_used = 0;
  int writers_skipped = 0;  // missing genuine or forgery scores
};

// Mean of per-writer EERs, each at its own threshold. Writers with an
// empty class are excluded and counted in writers_skipped.
EerUserResult eer_user(const ScoreSet& scores, ForgeryClass forgery_class);

struct AerResult {
  double aer = 0.0;               // (FRR + FAR_random + FAR_simple + FAR_skilled) / 4
  double aer_genuine_skilled = 0.0;  // (FRR + FAR_skilled) / 2
};

// All rates are percentages in [0, 100]; the four-way formula is fixed, a
// missing class is an error rather than a silent re-weighting.
AerResult aer(double frr, double far_random, double far_simple, double far_skilled);

struct MetricsReport {
  double eer_global_percent = 0.0;
  double eer_global_threshold = 0.0;
  double eer_user_percent = 0.0;
  double eer_user_random_percent = 0.0;   // EER_user on random forgeries
  double frr_percent = 0.0;               // at the global skilled threshold
  double far_random_percent = 0.0;
  std::optional<double> far_simple_percent;
  double far_skilled_percent = 0.0;
  std::optional<AerResult> aer_result;    // present when simple forgeries exist
  int writers = 0;
  int writers_skipped = 0;
};

// Full report over a score set: EER global/user on skilled forgeries,
// EER user on random forgeries, FRR/FAR at the global skilled threshold,
// and AER when all three forgery classes are present.
MetricsReport compute_metrics(const ScoreSet& scores);

std::string format_report_table(const MetricsReport& report);

}  // namespace sigspp

#endif  // SIGSPP_METRICS_HPP_
