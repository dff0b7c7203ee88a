#include "experiment.hpp"

#include <fstream>
#include <string>

#include "kdrank/error.hpp"

namespace kdrank::cli {
namespace {

ModelSection model_from_json(const Json& j, const std::string& section) {
  require_keys(j, {"scorer", "train"}, section);
  ModelSection m;
  if (j.contains("scorer")) m.scorer = scorer_config_from_json(j.at("scorer"));
  if (j.contains("train")) m.train = train_config_from_json(j.at("train"));
  return m;
}

template <typename T>
void read(const Json& j, const char* key, T& field) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bench.") + key + ": " + e.what());
  }
}

BenchSection bench_from_json(const Json& j) {
  require_keys(j, {"scorer", "kinds", "candidates", "warmup", "trials"}, "bench");
  BenchSection b;
  if (j.contains("scorer")) b.scorer = scorer_config_from_json(j.at("scorer"));
  if (j.contains("kinds")) {
    KDRANK_CHECK(j.at("kinds").is_array(), ConfigError, "bench.kinds must be an array of scorer names");
    b.kinds.clear();
    for (const Json& k : j.at("kinds")) b.kinds.push_back(parse_scorer_kind(k.get<std::string>()));
  }
  read(j, "candidates", b.candidates);
  read(j, "warmup", b.warmup);
  read(j, "trials", b.trials);
  return b;
}

}  // namespace

ExperimentConfig experiment_from_json(const Json& j) {
  require_keys(j, {"corpus", "teacher", "students", "metrics", "bench"}, "experiment");
  ExperimentConfig c;
  if (j.contains("corpus")) c.corpus = corpus_config_from_json(j.at("corpus"));
  if (j.contains("teacher")) c.teacher = model_from_json(j.at("teacher"), "teacher");
  if (j.contains("students")) {
    KDRANK_CHECK(j.at("students").is_object(), ConfigError, "'students' must map names to student sections");
    for (const auto& [name, section] : j.at("students").items()) {
      c.students.emplace(name, model_from_json(section, "students." + name));
    }
  }
  if (j.contains("metrics")) c.metrics = metric_config_from_json(j.at("metrics"));
  if (j.contains("bench")) c.bench = bench_from_json(j.at("bench"));
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  KDRANK_CHECK(in.good(), Error, "cannot open config file '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

Json to_json(const ModelSection& m) { return Json{{"scorer", to_json(m.scorer)}, {"train", to_json(m.train)}}; }

Json to_json(const BenchSection& b) {
  Json kinds = Json::array();
  for (ScorerKind k : b.kinds) kinds.push_back(std::string(to_string(k)));
  return Json{{"scorer", to_json(b.scorer)},
              {"kinds", kinds},
              {"candidates", b.candidates},
              {"warmup", b.warmup},
              {"trials", b.trials}};
}

void write_json(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  KDRANK_CHECK(out.good(), Error, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace kdrank::cli
