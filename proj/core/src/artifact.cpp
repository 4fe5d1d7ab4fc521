#include "sgcrl/artifact.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "sgcrl/io_util.hpp"
#include "sgcrl/repr.hpp"

namespace sgcrl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json optional_json(const std::optional<long>& v) { return v ? json(*v) : json(nullptr); }

std::optional<long> optional_long(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<long>();
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::string& expected_header) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != expected_header)
    throw SchemaError(path + ": expected header '" + expected_header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(io::split(line));
  return rows;
}

const char* kCheckpointsHeader = "episode,eval_success_k,eval_success_n,pearson_r,coverage";
const char* kExtraHeader =
    "episode,window_episodes,window_successes,transitions,goal_reach_k,embedding_ref";
const char* kPsiHeader = "state_id,similarity,visits";

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

void write_manifest(const RunArtifact& art, const std::string& dir) {
  const auto& m = art.manifest;
  json j;
  j["schema_version"] = kArtifactSchemaVersion;
  j["recipe"] = m.recipe;
  j["env"] = m.env;
  j["seed"] = m.seed;
  j["code_version"] = m.code_version;
  j["complete"] = m.complete;
  j["config"] = m.config;
  j["goals"] = m.goals;
  json scalars = json::object();
  for (const auto& [k, v] : m.scalars) scalars[k] = io::format_double(v);
  j["scalars"] = scalars;
  j["events"] = {{"first_success_episode", optional_json(art.events.first_success_episode)},
                 {"first_success_transitions", optional_json(art.events.first_success_transitions)},
                 {"first_majority_success_episode",
                  optional_json(art.events.first_majority_success_episode)}};
  j["num_checkpoints"] = art.checkpoints.size();
  j["num_states"] = art.checkpoints.empty() ? 0 : art.checkpoints.front().psi_sim.size();
  fs::create_directories(dir);
  io::write_file((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
}

void emit_artifact(const RunArtifact& art, const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "psi_sim", ec);
  if (ec) throw SchemaError("cannot create " + (root / "psi_sim").string() + ": " + ec.message());

  std::string cps = std::string(kCheckpointsHeader) + "\n";
  std::string extra = std::string(kExtraHeader) + "\n";
  for (const auto& cp : art.checkpoints) {
    if (cp.psi_sim.size() != cp.visitation.size())
      throw ConfigError("checkpoint psi_sim and visitation differ in length");
    const auto corr = visitation_similarity_correlation(cp.visitation, cp.psi_sim);
    const double cov = coverage(cp.visitation, static_cast<int>(cp.visitation.size()));
    const std::string ep = std::to_string(cp.episode);
    cps += ep + "," + std::to_string(cp.eval_success_k) + "," + std::to_string(cp.eval_success_n) +
           "," + io::format_double(corr.pearson_r.value_or(std::nan(""))) + "," +
           io::format_double(cov) + "\n";

    std::string ref = cp.embedding_ref;
    if (cp.embedding) {
      ref = "embeddings/" + ep;
      fs::create_directories(root / "embeddings");
      save_table(EmbeddingTable(*cp.embedding), (root / ref).string(), art.manifest.seed,
                 cp.episode);
    }
    extra += ep + "," + std::to_string(cp.window_episodes) + "," +
             std::to_string(cp.window_successes) + "," + std::to_string(cp.transitions) + "," +
             join_ints(cp.goal_reach_k) + "," + ref + "\n";

    std::string psi = std::string(kPsiHeader) + "\n";
    for (std::size_t s = 0; s < cp.psi_sim.size(); ++s)
      psi += std::to_string(s) + "," + io::format_double(cp.psi_sim[s]) + "," +
             std::to_string(cp.visitation[s]) + "\n";
    io::write_file((root / "psi_sim" / (ep + ".csv")).string(), psi);
  }
  io::write_file((root / "checkpoints.csv").string(), cps);
  io::write_file((root / "checkpoint_extra.csv").string(), extra);
  write_manifest(art, dir);
}

RunArtifact load_artifact(const std::string& dir) {
  const fs::path root(dir);
  json j;
  try {
    j = json::parse(io::read_file((root / "manifest.json").string()));
  } catch (const json::exception& e) {
    throw SchemaError("bad manifest in " + dir + ": " + e.what());
  }
  RunArtifact art;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kArtifactSchemaVersion)
      throw SchemaError("artifact schema version " + std::to_string(version) + " in " + dir +
                        " is not supported (expected " +
                        std::to_string(kArtifactSchemaVersion) + ")");
    auto& m = art.manifest;
    m.recipe = j.at("recipe").get<std::string>();
    m.env = j.at("env").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.code_version = j.at("code_version").get<std::string>();
    m.complete = j.at("complete").get<bool>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.goals = j.at("goals").get<std::vector<StateId>>();
    for (const auto& [k, v] : j.at("scalars").items())
      m.scalars[k] = io::parse_double(v.get<std::string>());
    const auto& ev = j.at("events");
    art.events.first_success_episode = optional_long(ev, "first_success_episode");
    art.events.first_success_transitions = optional_long(ev, "first_success_transitions");
    art.events.first_majority_success_episode = optional_long(ev, "first_majority_success_episode");
  } catch (const json::exception& e) {
    throw SchemaError("manifest in " + dir + " is missing fields: " + e.what());
  }

  const auto rows = read_csv((root / "checkpoints.csv").string(), kCheckpointsHeader);
  const auto extra = read_csv((root / "checkpoint_extra.csv").string(), kExtraHeader);
  if (rows.size() != extra.size()) throw SchemaError("checkpoint files disagree in length");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& x = extra[i];
    if (r.size() != 5 || x.size() != 6) throw SchemaError("checkpoint row has wrong width");
    Checkpoint cp;
    cp.episode = io::parse_long(r[0]);
    if (io::parse_long(x[0]) != cp.episode) throw SchemaError("checkpoint files disagree");
    cp.eval_success_k = static_cast<int>(io::parse_long(r[1]));
    cp.eval_success_n = static_cast<int>(io::parse_long(r[2]));
    cp.window_episodes = static_cast<int>(io::parse_long(x[1]));
    cp.window_successes = static_cast<int>(io::parse_long(x[2]));
    cp.transitions = io::parse_long(x[3]);
    if (!x[4].empty())
      for (const auto& f : io::split(x[4], ';')) cp.goal_reach_k.push_back(static_cast<int>(io::parse_long(f)));
    cp.embedding_ref = x[5];

    const auto psi = read_csv((root / "psi_sim" / (r[0] + ".csv")).string(), kPsiHeader);
    for (std::size_t s = 0; s < psi.size(); ++s) {
      if (psi[s].size() != 3 || io::parse_long(psi[s][0]) != static_cast<long>(s))
        throw SchemaError("psi_sim file for episode " + r[0] + " is malformed");
      cp.psi_sim.push_back(io::parse_double(psi[s][1]));
      cp.visitation.push_back(io::parse_long(psi[s][2]));
    }
    if (!cp.embedding_ref.empty()) cp.embedding = load_table((root / cp.embedding_ref).string()).vectors();
    art.checkpoints.push_back(std::move(cp));
  }
  return art;
}

std::vector<std::string> validate_artifact(const std::string& dir) {
  std::vector<std::string> problems;
  RunArtifact art;
  try {
    art = load_artifact(dir);
  } catch (const std::exception& e) {
    problems.emplace_back(e.what());
    return problems;
  }
  if (!art.manifest.complete) problems.emplace_back("run is marked incomplete");
  if (art.checkpoints.empty()) problems.emplace_back("no checkpoints");
  for (std::size_t i = 0; i < art.checkpoints.size(); ++i) {
    const auto& cp = art.checkpoints[i];
    const std::string where = "checkpoint " + std::to_string(cp.episode) + ": ";
    if (i > 0 && cp.episode <= art.checkpoints[i - 1].episode)
      problems.push_back(where + "episodes are not strictly increasing");
    if (cp.eval_success_k < 0 || cp.eval_success_k > cp.eval_success_n)
      problems.push_back(where + "eval successes out of range");
    for (double v : cp.psi_sim)
      if (!(v >= -1.0 && v <= 1.0)) {
        problems.push_back(where + "similarity outside [-1, 1]");
        break;
      }
    for (long v : cp.visitation)
      if (v < 0) {
        problems.push_back(where + "negative visit count");
        break;
      }
  }
  return problems;
}

}  // namespace sgcrl
