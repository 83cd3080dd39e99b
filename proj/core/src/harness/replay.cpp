#include "otblab/harness/replay.hpp"

#include <filesystem>
#include <fstream>

namespace otblab::harness {

CsvTable advantage_table() {
  return CsvTable({"seed", "step", "group", "member", "t", "token", "reward_to_go", "baseline",
                   "advantage"});
}

void append_advantages(CsvTable& table, const LogKey& key, const GroupBatch& group,
                       const AdvantageTable& advantages) {
  for (std::size_t i = 0; i < group.size(); ++i) {
    const Trajectory& m = group.members[i];
    for (std::size_t t = 0; t < m.length(); ++t) {
      table.append(CsvTable::Row()
                       .add(static_cast<unsigned long long>(key.seed))
                       .add(static_cast<long long>(key.step))
                       .add(static_cast<long long>(key.group))
                       .add(i)
                       .add(t + 1)
                       .add(static_cast<int>(m.steps[t].token))
                       .add(advantages.reward_to_go[i][t])
                       .add(advantages.baselines[i][t])
                       .add(advantages.advantages[i][t]));
    }
  }
}

CsvTable replay_advantages(std::istream& log, BaselineKind kind, const BaselineOptions& options) {
  if (kind == BaselineKind::ValueOracle && !options.oracle_baseline) {
    throw Error("value_oracle needs a policy and cannot be replayed from a log");
  }
  const std::vector<LoggedTrajectory> entries = read_jsonl(log);
  CsvTable table = advantage_table();
  std::size_t i = 0;
  while (i < entries.size()) {
    const LogKey key = entries[i].key;
    GroupBatch group;
    group.prompt_id = entries[i].trajectory.prompt_id;
    while (i < entries.size() && entries[i].key == key) group.members.push_back(entries[i++].trajectory);
    group.validate();
    append_advantages(table, key, group, advantages(group, kind, options));
  }
  return table;
}

void run_replay(const std::string& log_path, BaselineKind kind, const BaselineOptions& options,
                const std::string& out_dir) {
  std::ifstream in(log_path);
  if (!in) throw Error("cannot open log '" + log_path + "'");
  replay_advantages(in, kind, options)
      .write((std::filesystem::path(out_dir) / "advantages.csv").string());
}

}  // namespace otblab::harness
