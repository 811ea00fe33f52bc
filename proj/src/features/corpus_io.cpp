#include "vqmd/features/corpus_io.hpp"

#include <algorithm>

#include "vqmd/common/error.hpp"
#include "vqmd/train/tensor_file.hpp"

namespace vqmd::features {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json matrix_to_json(const torch::Tensor& m) {
  const auto d = m.to(torch::kFloat64).contiguous();
  auto acc = d.accessor<double, 2>();
  json rows = json::array();
  for (int64_t i = 0; i < d.size(0); ++i) {
    json row = json::array();
    for (int64_t k = 0; k < d.size(1); ++k) row.push_back(acc[i][k]);
    rows.push_back(std::move(row));
  }
  return rows;
}

torch::Tensor matrix_from_json(const json& rows) {
  const auto n = static_cast<int64_t>(rows.size());
  const auto k = n > 0 ? static_cast<int64_t>(rows[0].size()) : 0;
  auto out = torch::empty({n, k}, torch::kFloat64);
  auto acc = out.accessor<double, 2>();
  for (int64_t i = 0; i < n; ++i) {
    if (static_cast<int64_t>(rows[i].size()) != k) throw ConfigError("factors.json: ragged matrix");
    for (int64_t j = 0; j < k; ++j) acc[i][j] = rows[i][j].get<double>();
  }
  return out;
}

}  // namespace

json factors_to_json(const GroundTruthFactors& f) {
  return json{{"s_id", f.s_id}, {"s_cls", f.s_cls}, {"c", matrix_to_json(f.c)}, {"a", matrix_to_json(f.a)},
              {"v", matrix_to_json(f.v)}};
}

GroundTruthFactors factors_from_json(const json& j) {
  return {j.at("s_id").get<int64_t>(), j.at("s_cls").get<int64_t>(), matrix_from_json(j.at("c")),
          matrix_from_json(j.at("a")), matrix_from_json(j.at("v"))};
}

void save_corpus(const SyntheticCorpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& seq : corpus.sequences) {
    require(!seq.id.empty(), "save_corpus: sequence without id");
    const auto sub = dir / seq.id;
    fs::create_directories(sub);
    train::write_tensor(sub / "x_a.ten", seq.x_a);
    train::write_tensor(sub / "x_v.ten", seq.x_v);
    if (seq.factors) train::write_file_atomic(sub / "factors.json", factors_to_json(*seq.factors).dump());
  }
  train::write_file_atomic(dir / "spec.json", json(corpus.spec).dump(2));
}

SyntheticCorpus load_corpus(const fs::path& dir) {
  if (!fs::exists(dir / "spec.json")) throw ConfigError("corpus: missing " + (dir / "spec.json").string());
  SyntheticCorpus corpus;
  corpus.spec = json::parse(train::read_file(dir / "spec.json")).get<SyntheticFactorSpec>();

  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "x_a.ten")) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& sub : subdirs) {
    AVFeatureSequence seq{train::read_tensor(sub / "x_a.ten"), train::read_tensor(sub / "x_v.ten"),
                          sub.filename().string(), std::nullopt};
    if (fs::exists(sub / "factors.json")) {
      seq.factors = factors_from_json(json::parse(train::read_file(sub / "factors.json")));
    }
    seq.validate();
    corpus.sequences.push_back(std::move(seq));
  }
  return corpus;
}

}  // namespace vqmd::features
