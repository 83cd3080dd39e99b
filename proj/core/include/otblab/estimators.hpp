#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otblab/baselines.hpp"
#include "otblab/grad_vec.hpp"
#include "otblab/oracle.hpp"
#include "otblab/policy.hpp"

namespace otblab {

enum class EstimatorForm { NonCausal, Causal, CausalTIS };

EstimatorForm parse_estimator_form(std::string_view name);
std::string to_string(EstimatorForm form);

/// The TIS clip is `options.tis_clip`.
struct EstimatorSpec {
  EstimatorForm form = EstimatorForm::Causal;
  BaselineKind baseline = BaselineKind::Otb;
  BaselineOptions options;
};

/// (R - B) S(tau).
GradVec grad_noncausal(const ScoredTrajectory& scored, double baseline);

/// sum_t s_t (G_t - B_t); `baselines` covers at least the trajectory length.
GradVec grad_causal(const ScoredTrajectory& scored, std::span<const double> baselines);
GradVec grad_causal(const ScoredTrajectory& scored, const BaselineSchedule& schedule);

/// sum_t min(c, rho_t) s_t (G_t - B_t).
GradVec grad_tis(const ScoredTrajectory& scored, std::span<const double> baselines, double clip);
GradVec grad_tis(const ScoredTrajectory& scored, const BaselineSchedule& schedule, double clip);

/// out += scale * sum_t coef_t s_t
void accumulate_weighted_scores(GradVec& out, const ScoredTrajectory& scored,
                                std::span<const double> coef, double scale);

/// Per-step coefficients multiplying s_t in the estimator `form`, given the
/// member's baseline row.
std::vector<double> score_coefficients(const Trajectory& traj, EstimatorForm form,
                                       std::span<const double> baselines, double clip);

struct BatchEstimate {
  AdvantageTable table;
  std::vector<GradVec> grads;
  GradVec mean;
};

/// Estimator for one group of scored responses (rewards already applied).
BatchEstimate estimate_batch(const std::vector<ScoredTrajectory>& members,
                             const EstimatorSpec& spec);

struct BatchDiagnostics {
  double p_total = 0.0;      // (1/N) sum W^(tau) A(tau)^2 with A(tau) = A_1
  double signal = 0.0;       // ||mean g||^2
  double var_of_mean = 0.0;  // (p_total - signal) / (N - 1)
  double grad_norm = 0.0;    // ||mean g||
  double p_total_tok = 0.0;  // (1/N) sum_i sum_t w^_t A_t^2
  double var_of_mean_tok = 0.0;
};

BatchDiagnostics batch_diagnostics(const GroupBatch& group, const AdvantageTable& table,
                                   const std::vector<GradVec>& grads);

/// Fixed-baseline estimator as a per-path map, for exact_moments.
PathEstimator causal_estimator(const RewardModel& model, BaselineSchedule schedule);
PathEstimator noncausal_estimator(const RewardModel& model, double baseline);
PathEstimator tis_estimator(const RewardModel& model, BaselineSchedule schedule, double clip);

/// Exact variance of an estimator with a fixed (non-group) baseline.
double exact_estimator_variance(const EnumeratedSpace& space, const RewardModel& model,
                                EstimatorForm form, const BaselineSchedule& schedule,
                                double clip = 2.0);

/// Max-norm of E[mean batch gradient] - true gradient, with the expectation
/// taken exactly over all ordered N-tuples of paths. On-policy forms only.
double group_expectation_bias(const EstimatorSpec& spec, const EnumeratedSpace& space,
                              const RewardModel& model, std::size_t group_size,
                              std::size_t cap = kEnumerationCap);

}  // namespace otblab
