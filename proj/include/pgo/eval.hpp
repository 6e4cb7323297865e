#pragma once

// Outlier-detection scoring and trajectory error metrics.
//
// Positive class = outlier. Scores count loop-closure factors only, with the
// 0/0 = 1 convention for both precision and recall.
//
// ATE: positions of est are rigidly aligned (no scale) to gt, then the RMSE of
// the position residuals is reported in meters.
// RPE: for consecutive poses, the translation part of
// log(dgt^-1 * dest) is RMS-averaged and divided by the RMS ground-truth step
// length, in percent.

#include <cmath>
#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <fmt/format.h>

#include "json.hpp"
#include "pgo/errors.hpp"
#include "pgo/posegraph.hpp"
#include "pgo/solver.hpp"

namespace pgo {

struct ClassificationReport {
  double precision = 1.0;
  double recall = 1.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t true_negatives = 0;
  std::size_t false_negatives = 0;

  bool perfect() const { return precision == 1.0 && recall == 1.0; }
};

struct TrajectoryErrors {
  double ate = 0.0;  // meters
  double rpe = 0.0;  // percent
};

inline ClassificationReport score_classification(std::span<const Classification> predicted,
                                                 const std::vector<bool>& labels, std::span<const FactorKind> kinds) {
  if (predicted.size() != labels.size() || predicted.size() != kinds.size()) {
    throw ContractError("score_classification: predicted, labels and kinds must have equal length");
  }
  ClassificationReport rep;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (kinds[i] != FactorKind::LoopClosure) continue;
    const bool said_outlier = predicted[i] == Classification::Outlier;
    if (labels[i]) {
      said_outlier ? ++rep.true_positives : ++rep.false_negatives;
    } else {
      said_outlier ? ++rep.false_positives : ++rep.true_negatives;
    }
  }
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  rep.precision = ratio(rep.true_positives, rep.true_positives + rep.false_positives);
  rep.recall = ratio(rep.true_positives, rep.true_positives + rep.false_negatives);
  return rep;
}

// labels[i] is the ground-truth outlier flag of factor i.
template <class P>
ClassificationReport score_classification(const GncResult<P>& result, const std::vector<bool>& labels) {
  std::vector<FactorKind> kinds;
  kinds.reserve(result.poses.factors.size());
  for (const auto& f : result.poses.factors) kinds.push_back(f.kind);
  return score_classification(result.classification, labels, kinds);
}

template <class P>
std::vector<bool> true_outlier_labels(const PoseGraph<P>& g) {
  std::vector<bool> out;
  out.reserve(g.factors.size());
  for (const auto& f : g.factors) out.push_back(f.is_true_outlier.value_or(false));
  return out;
}

namespace detail {

template <class P>
void check_trajectories(const std::map<VertexId, P>& est, const std::map<VertexId, P>& gt) {
  if (est.size() != gt.size()) throw ContractError("trajectories differ in length");
  if (gt.size() < 2) throw DomainError("trajectory metrics need at least two poses");
  for (auto a = est.begin(), b = gt.begin(); a != est.end(); ++a, ++b) {
    if (a->first != b->first) throw ContractError("trajectory ids do not match");
  }
}

template <class P>
Eigen::Matrix<double, PoseTraits<P>::kTranslationDim, 1> position(const P& p) {
  if constexpr (PoseTraits<P>::kTranslationDim == 2) {
    return p.translation();
  } else {
    return p.t;
  }
}

}  // namespace detail

template <class P>
double ate(const std::map<VertexId, P>& est, const std::map<VertexId, P>& gt) {
  detail::check_trajectories(est, gt);
  constexpr int D = PoseTraits<P>::kTranslationDim;
  const auto n = static_cast<Eigen::Index>(gt.size());
  Eigen::Matrix<double, D, Eigen::Dynamic> src(D, n);
  Eigen::Matrix<double, D, Eigen::Dynamic> dst(D, n);
  Eigen::Index k = 0;
  for (auto a = est.begin(), b = gt.begin(); a != est.end(); ++a, ++b, ++k) {
    src.col(k) = detail::position(a->second);
    dst.col(k) = detail::position(b->second);
  }
  const Eigen::Matrix<double, D + 1, D + 1> t = Eigen::umeyama(src, dst, false);
  const Eigen::Matrix<double, D, Eigen::Dynamic> aligned =
      (t.template topLeftCorner<D, D>() * src).colwise() + t.template topRightCorner<D, 1>();
  return std::sqrt((aligned - dst).colwise().squaredNorm().sum() / static_cast<double>(n));
}

template <class P>
double rpe(const std::map<VertexId, P>& est, const std::map<VertexId, P>& gt) {
  detail::check_trajectories(est, gt);
  constexpr int D = PoseTraits<P>::kTranslationDim;
  double err2 = 0.0;
  double step2 = 0.0;
  std::size_t pairs = 0;
  auto a = est.begin();
  auto b = gt.begin();
  auto a_prev = a++;
  auto b_prev = b++;
  for (; a != est.end(); a_prev = a++, b_prev = b++) {
    const P dest = se_compose(se_inverse(a_prev->second), a->second);
    const P dgt = se_compose(se_inverse(b_prev->second), b->second);
    const auto e = se_log(se_compose(se_inverse(dgt), dest));
    err2 += e.template head<D>().squaredNorm();
    step2 += detail::position(dgt).squaredNorm();
    ++pairs;
  }
  if (step2 == 0.0) throw DomainError("rpe: ground-truth trajectory does not move");
  const double denom = static_cast<double>(pairs);
  return 100.0 * std::sqrt(err2 / denom) / std::sqrt(step2 / denom);
}

template <class P>
TrajectoryErrors trajectory_errors(const std::map<VertexId, P>& est, const std::map<VertexId, P>& gt) {
  return {ate(est, gt), rpe(est, gt)};
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::ordered_json to_json(const ClassificationReport& r) {
  nlohmann::ordered_json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["true_positives"] = r.true_positives;
  j["false_positives"] = r.false_positives;
  j["true_negatives"] = r.true_negatives;
  j["false_negatives"] = r.false_negatives;
  return j;
}

inline nlohmann::ordered_json to_json(const TrajectoryErrors& e) {
  nlohmann::ordered_json j;
  j["ate_m"] = e.ate;
  j["rpe_percent"] = e.rpe;
  return j;
}

inline std::string format_report(const ClassificationReport& c, const TrajectoryErrors* t) {
  std::string s;
  s += fmt::format("{:<12}{:>12.6f}\n", "precision", c.precision);
  s += fmt::format("{:<12}{:>12.6f}\n", "recall", c.recall);
  s += fmt::format("{:<12}{:>12}\n", "TP", c.true_positives);
  s += fmt::format("{:<12}{:>12}\n", "FP", c.false_positives);
  s += fmt::format("{:<12}{:>12}\n", "TN", c.true_negatives);
  s += fmt::format("{:<12}{:>12}\n", "FN", c.false_negatives);
  if (t != nullptr) {
    s += fmt::format("{:<12}{:>12.6f}\n", "ATE [m]", t->ate);
    s += fmt::format("{:<12}{:>12.6f}\n", "RPE [%]", t->rpe);
  }
  return s;
}

// factor,kind,residual,mu_final,classification,label
template <class P>
void write_factor_csv(const PoseGraph<P>& g, std::span<const double> residuals,
                      std::span<const std::vector<MuRecord>> mu_history, std::span<const Classification> cls,
                      std::ostream& os) {
  os << "factor,kind,residual,mu_final,classification,label\n";
  for (std::size_t i = 0; i < g.factors.size(); ++i) {
    const auto& f = g.factors[i];
    const std::string mu = mu_history[i].empty() ? std::string("") : fmt::format("{:.17g}", mu_history[i].back().mu);
    const std::string label = f.is_true_outlier ? (*f.is_true_outlier ? "1" : "0") : "";
    os << i << ',' << to_string(f.kind) << ',' << fmt::format("{:.17g}", residuals[i]) << ',' << mu << ','
       << to_string(cls[i]) << ',' << label << '\n';
  }
}

}  // namespace pgo
