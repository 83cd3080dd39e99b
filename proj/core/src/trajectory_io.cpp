#include "otblab/trajectory_io.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

#include "otblab/rewards.hpp"

namespace otblab {

using nlohmann::json;

std::string to_json_line(const LoggedTrajectory& entry, bool include_dists) {
  const Trajectory& traj = entry.trajectory;
  // ordered_json keeps the key order stable in the output bytes.
  nlohmann::ordered_json j;
  j["seed"] = entry.key.seed;
  j["step"] = entry.key.step;
  j["group"] = entry.key.group;
  j["prompt_id"] = traj.prompt_id;
  j["tokens"] = traj.tokens();
  j["rewards"] = traj.rewards();
  std::vector<double> probs, sumsq;
  for (const Step& s : traj.steps) {
    probs.push_back(s.token_prob);
    sumsq.push_back(s.prob_sumsq);
  }
  j["probs"] = probs;
  j["sumsq"] = sumsq;
  j["energy"] = realized_energy_profile(traj);
  const bool have_dists =
      !traj.steps.empty() &&
      std::all_of(traj.steps.begin(), traj.steps.end(), [](const Step& s) { return !s.dist.empty(); });
  if (include_dists && have_dists) {
    auto dists = nlohmann::ordered_json::array();
    for (const Step& s : traj.steps) dists.push_back(s.dist);
    j["dists"] = std::move(dists);
  }
  if (traj.has_behavior_logprobs()) {
    std::vector<double> lp;
    for (const Step& s : traj.steps) lp.push_back(*s.behavior_logprob);
    j["behavior_logprobs"] = lp;
  }
  return j.dump();
}

namespace {

template <class T>
std::vector<T> read_array(const json& j, const char* key, std::size_t expected) {
  if (!j.contains(key)) throw Error(std::string("missing key '") + key + "'");
  const json& a = j.at(key);
  if (!a.is_array()) throw Error(std::string("'") + key + "' must be an array");
  auto out = a.get<std::vector<T>>();
  if (expected != static_cast<std::size_t>(-1) && out.size() != expected) {
    throw Error(std::string("'") + key + "' has the wrong length");
  }
  return out;
}

LoggedTrajectory parse_object(const json& j) {
  if (!j.is_object()) throw Error("expected a JSON object");
  static const char* kKnown[] = {"seed",  "step",  "group",  "prompt_id",        "tokens", "rewards",
                                 "probs", "sumsq", "energy", "behavior_logprobs", "dists"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw Error("unknown key '" + key + "'");
    }
  }
  LoggedTrajectory out;
  out.key.seed = j.value("seed", std::uint64_t{0});
  out.key.step = j.value("step", std::int64_t{0});
  out.key.group = j.value("group", std::int64_t{0});
  if (!j.contains("prompt_id")) throw Error("missing key 'prompt_id'");
  out.trajectory.prompt_id = j.at("prompt_id").get<int>();

  const auto tokens = read_array<Token>(j, "tokens", static_cast<std::size_t>(-1));
  if (tokens.empty()) throw Error("'tokens' must be nonempty");
  const std::size_t n = tokens.size();
  const auto rewards = read_array<double>(j, "rewards", n);

  std::vector<Step> steps(n);
  if (j.contains("dists")) {
    const auto dists = read_array<std::vector<double>>(j, "dists", n);
    for (std::size_t i = 0; i < n; ++i) {
      if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= dists[i].size()) {
        throw Error("token outside the recorded distribution");
      }
      steps[i] = make_step(tokens[i], dists[i]);
    }
  } else {
    const auto probs = read_array<double>(j, "probs", n);
    const auto sumsq = read_array<double>(j, "sumsq", n);
    for (std::size_t i = 0; i < n; ++i) {
      steps[i].token = tokens[i];
      steps[i].token_prob = probs[i];
      steps[i].prob_sumsq = sumsq[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) steps[i].reward = rewards[i];
  if (j.contains("behavior_logprobs")) {
    const auto lp = read_array<double>(j, "behavior_logprobs", n);
    for (std::size_t i = 0; i < n; ++i) steps[i].behavior_logprob = lp[i];
  }
  out.trajectory.steps = std::move(steps);
  return out;
}

}  // namespace

LoggedTrajectory parse_json_line(const std::string& line, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number) + ": ";
  try {
    return parse_object(json::parse(line));
  } catch (const json::exception& e) {
    throw Error(where + e.what());
  } catch (const Error& e) {
    throw Error(where + e.what());
  }
}

void write_jsonl(std::ostream& out, const std::vector<LoggedTrajectory>& entries,
                 bool include_dists) {
  for (const auto& e : entries) out << to_json_line(e, include_dists) << '\n';
}

std::vector<LoggedTrajectory> read_jsonl(std::istream& in) {
  std::vector<LoggedTrajectory> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    out.push_back(parse_json_line(line, number));
  }
  return out;
}

}  // namespace otblab
