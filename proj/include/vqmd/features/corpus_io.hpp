#pragma once

#include <filesystem>

#include "vqmd/features/synthetic.hpp"

namespace vqmd::features {

/// Directory layout:
///   spec.json
///   <sequence id>/x_a.ten, x_v.ten, factors.json
void save_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);
SyntheticCorpus load_corpus(const std::filesystem::path& dir);

nlohmann::json factors_to_json(const GroundTruthFactors& f);
GroundTruthFactors factors_from_json(const nlohmann::json& j);

}  // namespace vqmd::features
