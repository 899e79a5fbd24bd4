#include "sigspp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace sigspp {

ForgeryClass forgery_class_from_string(const std::string& s) {
  if (s == "random") return ForgeryClass::kRandom;
  if (s == "simple") return ForgeryClass::kSimple;
  if (s == "skilled") return ForgeryClass::kSkilled;
  throw ConfigError("unknown forgery class '" + s + "'");
}

std::string to_string(ForgeryClass c) {
  switch (c) {
    case ForgeryClass::kRandom: return "random";
    case ForgeryClass::kSimple: return "simple";
    case ForgeryClass::kSkilled: return "skilled";
  }
  throw ConfigError("bad forgery class");
}

FarFrrCurve far_frr_curve(const std::vector<double>& genuine,
                          const std::vector<double>& forgery) {
  if (genuine.empty() || forgery.empty()) {
    throw DataError("far_frr_curve: both score lists must be non-empty");
  }
  std::set<double> distinct(genuine.begin(), genuine.end());
  distinct.insert(forgery.begin(), forgery.end());

  FarFrrCurve curve;
  curve.thresholds.push_back(-std::numeric_limits<double>::infinity());
  for (double t : distinct) curve.thresholds.push_back(t);
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());

  for (double t : curve.thresholds) {
    std::size_t rejected = 0;
    for (double g : genuine) {
      if (g < t) ++rejected;
    }
    std::size_t accepted = 0;
    for (double f : forgery) {
      if (f >= t) ++accepted;
    }
    curve.frr.push_back(static_cast<double>(rejected) / genuine.size());
    curve.far.push_back(static_cast<double>(accepted) / forgery.size());
  }
  return curve;
}

EerResult eer_from_scores(const std::vector<double>& genuine,
                          const std::vector<double>& forgery) {
  const FarFrrCurve curve = far_frr_curve(genuine, forgery);
  // d = FAR - FRR is non-increasing in t: find the sign change.
  for (std::size_t i = 0; i + 1 < curve.thresholds.size(); ++i) {
    const double d0 = curve.far[i] - curve.frr[i];
    if (d0 == 0.0) {
      return EerResult{100.0 * curve.far[i], curve.thresholds[i]};
    }
    const double d1 = curve.far[i + 1] - curve.frr[i + 1];
    if (d0 > 0.0 && d1 < 0.0) {
      // linear interpolation between the bracketing breakpoints
      const double s = d0 / (d0 - d1);
      const double eer = curve.frr[i] + s * (curve.frr[i + 1] - curve.frr[i]);
      const double threshold =
          std::isfinite(curve.thresholds[i]) && std::isfinite(curve.thresholds[i + 1])
              ? curve.thresholds[i] + s * (curve.thresholds[i + 1] - curve.thresholds[i])
              : curve.thresholds[i + 1];
      return EerResult{100.0 * eer, threshold};
    }
    if (d1 == 0.0) {
      return EerResult{100.0 * curve.far[i + 1], curve.thresholds[i + 1]};
    }
  }
  throw NumericError("eer: FAR/FRR curves do not cross");
}

EerResult eer_global(const ScoreSet& scores, ForgeryClass forgery_class) {
  std::vector<double> genuine, forgery;
  for (const auto& [writer, ws] : scores) {
    genuine.insert(genuine.end(), ws.genuine.begin(), ws.genuine.end());
    const auto& f = ws.forgeries(forgery_class);
    forgery.insert(forgery.end(), f.begin(), f.end());
  }
  if (genuine.empty() || forgery.empty()) {
    throw DataError("eer_global: pooled genuine/" + to_string(forgery_class) +
                    " scores are empty");
  }
  return eer_from_scores(genuine, forgery);
}

EerUserResult eer_user(const ScoreSet& scores, ForgeryClass forgery_class) {
  EerUserResult result;
  double sum = 0.0;
  for (const auto& [writer, ws] : scores) {
    const auto& forgery = ws.forgeries(forgery_class);
    if (ws.genuine.empty() || forgery.empty()) {
      ++result.writers_skipped;
      continue;
    }
    sum += eer_from_scores(ws.genuine, forgery).eer_percent;
    ++result.writers_used;
  }
  if (result.writers_used == 0) {
    throw DataError("eer_user: no writer has both genuine and " +
                    to_string(forgery_class) + " scores");
  }
  result.eer_percent = sum / result.writers_used;
  return result;
}

AerResult aer(double frr, double far_random, double far_simple, double far_skilled) {
  for (double rate : {frr, far_random, far_simple, far_skilled}) {
    if (!(rate >= 0.0 && rate <= 100.0)) {
      throw ConfigError("aer: rates must lie in [0, 100]");
    }
  }
  AerResult result;
  result.aer = (frr + far_random + far_simple + far_skilled) / 4.0;
  result.aer_genuine_skilled = (frr + far_skilled) / 2.0;
  return result;
}

namespace {

// FRR / FAR of one class at a fixed threshold, in percent.
double frr_at(const std::vector<double>& genuine, double t) {
  std::size_t rejected = 0;
  for (double g : genuine) {
    if (g < t) ++rejected;
  }
  return 100.0 * rejected / genuine.size();
}

double far_at(const std::vector<double>& forgery, double t) {
  std::size_t accepted = 0;
  for (double f : forgery) {
    if (f >= t) ++accepted;
  }
  return 100.0 * accepted / forgery.size();
}

}  // namespace

MetricsReport compute_metrics(const ScoreSet& scores) {
  if (scores.empty()) throw DataError("compute_metrics: empty score set");
  MetricsReport report;
  report.writers = static_cast<int>(scores.size());

  std::vector<double> genuine, random_f, simple_f, skilled_f;
  for (const auto& [writer, ws] : scores) {
    genuine.insert(genuine.end(), ws.genuine.begin(), ws.genuine.end());
    random_f.insert(random_f.end(), ws.random.begin(), ws.random.end());
    simple_f.insert(simple_f.end(), ws.simple.begin(), ws.simple.end());
    skilled_f.insert(skilled_f.end(), ws.skilled.begin(), ws.skilled.end());
  }
  if (genuine.empty() || skilled_f.empty()) {
    throw DataError("compute_metrics: needs genuine and skilled scores");
  }

  const EerResult global = eer_global(scores, ForgeryClass::kSkilled);
  report.eer_global_percent = global.eer_percent;
  report.eer_global_threshold = global.threshold;

  const EerUserResult user = eer_user(scores, ForgeryClass::kSkilled);
  report.eer_user_percent = user.eer_percent;
  report.writers_skipped = user.writers_skipped;

  if (!random_f.empty()) {
    report.eer_user_random_percent = eer_user(scores, ForgeryClass::kRandom).eer_percent;
  }

  const double t = global.threshold;
  report.frr_percent = frr_at(genuine, t);
  report.far_skilled_percent = far_at(skilled_f, t);
  if (!random_f.empty()) report.far_random_percent = far_at(random_f, t);
  if (!simple_f.empty()) {
    report.far_simple_percent = far_at(simple_f, t);
    report.aer_result = aer(report.frr_percent, report.far_random_percent,
                            *report.far_simple_percent, report.far_skilled_percent);
  }
  return report;
}

std::string format_report_table(const MetricsReport& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "writers: " << report.writers;
  if (report.writers_skipped > 0) out << " (skipped " << report.writers_skipped << ")";
  out << "\n";
  out << "FRR            " << report.frr_percent << "\n";
  out << "FAR_random     " << report.far_random_percent << "\n";
  if (report.far_simple_percent) {
    out << "FAR_simple     " << *report.far_simple_percent << "\n";
  }
  out << "FAR_skilled    " << report.far_skilled_percent << "\n";
  if (report.aer_result) {
    out << "AER            " << report.aer_result->aer << "\n";
    out << "AER_gen+skill  " << report.aer_result->aer_genuine_skilled << "\n";
  }
  out << "EER_global     " << report.eer_global_percent << "\n";
  out << "EER_user       " << report.eer_user_percent << "\n";
  out << "EER_user_rand  " << report.eer_user_random_percent << "\n";
  return out.str();
}

}  // namespace sigspp
