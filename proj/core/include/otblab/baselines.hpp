#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "otblab/common.hpp"
#include "otblab/trajectory.hpp"

namespace otblab {

/// N >= 2 responses to one prompt.
struct GroupBatch {
  int prompt_id = 0;
  std::vector<Trajectory> members;

  std::size_t size() const { return members.size(); }
  /// Throws unless N >= 2 and every member carries prompt_id.
  void validate() const;
};

enum class BaselineKind { None, Grpo, Rloo, Opo, Ogb, Otb, OtbIsolated, OtbTis, ValueOracle };

BaselineKind parse_baseline_kind(std::string_view name);
std::string to_string(BaselineKind kind);
const std::vector<BaselineKind>& all_baseline_kinds();

/// Token-level kinds produce one baseline per step; the rest produce one
/// per member, broadcast over its steps.
bool is_token_level(BaselineKind kind);

/// Baseline as a function of (prompt, y_<t). Used by `value_oracle` and to
/// plug fixed exact schedules into the group code path.
using PrefixBaseline = std::function<double(int prompt, Prefix prefix)>;

struct BaselineOptions {
  /// Leave member i out of its own group statistics. With no other
  /// survivor the baseline is 0.
  bool exclude_self = false;
  double tis_clip = 2.0;
  PrefixBaseline oracle_baseline;
};

double grpo_baseline(const GroupBatch& group);
double rloo_baseline(const GroupBatch& group, std::size_t member);
/// sum R T / sum T.
double opo_length_baseline(const GroupBatch& group);

// Weighted centroids. `exclude` drops one member from both sums. When the
// weights sum to at most 1e-12 the unweighted mean over the same members is
// used instead.
double ogb_hat(const GroupBatch& group, std::optional<std::size_t> exclude = {});
double otb_hat(const GroupBatch& group, std::size_t t, std::optional<std::size_t> exclude = {});
double otb_isolated_hat(const GroupBatch& group, std::size_t t,
                        std::optional<std::size_t> exclude = {});
double otb_tis_hat(const GroupBatch& group, std::size_t t, double clip,
                   std::optional<std::size_t> exclude = {});

/// min(clip, pi/pi_beta) per step, with log pi_beta clamped at -50. Throws
/// when behavior log-probs are missing.
std::vector<double> clipped_ratios(const Trajectory& traj, double clip);

/// sum_{j <= t} rho_j^2 w^_j.
std::vector<double> tis_energy_profile(const Trajectory& traj, double clip);

/// Ragged per-member tables; row i has one entry per step of member i.
/// Steps past a member's end are simply absent.
struct AdvantageTable {
  std::vector<std::vector<double>> reward_to_go;
  std::vector<std::vector<double>> baselines;
  std::vector<std::vector<double>> advantages;

  std::size_t members() const { return advantages.size(); }
  std::size_t width() const;
  bool valid(std::size_t member, std::size_t t) const {
    return member < advantages.size() && t >= 1 && t <= advantages[member].size();
  }
};

/// Per-member, per-step baseline values B_t^(i).
std::vector<std::vector<double>> baseline_values(const GroupBatch& group, BaselineKind kind,
                                                 const BaselineOptions& options = {});

/// A_t = G_t - B_t for token-level kinds; A = R - B broadcast otherwise.
AdvantageTable advantages(const GroupBatch& group, BaselineKind kind,
                          const BaselineOptions& options = {});

}  // namespace otblab
