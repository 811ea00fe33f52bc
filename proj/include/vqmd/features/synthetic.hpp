#pragma once

#include <torch/torch.h>

#include <json.hpp>
#include <random>
#include <vector>

#include "vqmd/features/sequence.hpp"

namespace vqmd::features {

enum class SyntheticMode { Feature, RawLike };

/// Parameters of the synthetic ground-truth-factor corpus.
///
/// "feature" mode emits observation vectors directly in the space the MDVAE
/// consumes. "raw-like" mode emits 16x16 grayscale images (d_v = 256) and
/// 65-bin power spectra (d_a = 65) so the two-stage pipeline can be exercised.
struct SyntheticFactorSpec {
  int64_t n_sequences = 200;
  int64_t n_identities = 4;
  int64_t n_classes = 4;
  int64_t dim_shared_dyn = 2;
  int64_t dim_audio_dyn = 1;
  int64_t dim_visual_dyn = 1;
  int64_t d_a = 32;
  int64_t d_v = 64;
  int64_t T = 30;
  double noise_std = 0.05;
  SyntheticMode mode = SyntheticMode::Feature;
  uint64_t seed = 0;

  static constexpr int64_t kImageSide = 16;
  static constexpr int64_t kSpectrumBins = 65;

  /// Preset for raw-like mode with the matching observation dims.
  static SyntheticFactorSpec raw_like(int64_t n_sequences, int64_t T, uint64_t seed);

  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticFactorSpec& s);
void from_json(const nlohmann::json& j, SyntheticFactorSpec& s);

struct SyntheticCorpus {
  SyntheticFactorSpec spec;
  std::vector<AVFeatureSequence> sequences;  ///< each carries its GroundTruthFactors
};

inline constexpr double kFactorStepStd = 0.1;
inline constexpr double kFactorMaxStep = 0.3;

/// The fixed observation maps of a corpus (embeddings, mixing matrices, biases).
/// A pure function of (spec, seed); the same instance renders every sequence.
class ObservationModel {
 public:
  explicit ObservationModel(const SyntheticFactorSpec& spec);

  /// Renders clean observations for `factors`; adds Gaussian noise when `noise_rng` is given.
  AVFeatureSequence render(const GroundTruthFactors& factors, std::mt19937_64* noise_rng) const;

  const SyntheticFactorSpec& spec() const { return spec_; }

 private:
  torch::Tensor static_embedding(const GroundTruthFactors& f) const;
  AVFeatureSequence render_feature(const GroundTruthFactors& f) const;
  AVFeatureSequence render_raw_like(const GroundTruthFactors& f) const;

  SyntheticFactorSpec spec_;
  torch::Tensor id_embed_, cls_embed_;      // n x 4
  torch::Tensor static_a_, static_v_;       // d x 8
  torch::Tensor dyn_a_, dyn_v_;             // d x (shared + specific)
  torch::Tensor bias_a_, bias_v_;           // d
  torch::Tensor mouth_mask_, eyes_mask_;    // raw-like only, d_v
};

/// Samples labels and bounded random-walk trajectories for one sequence.
GroundTruthFactors sample_factors(const SyntheticFactorSpec& spec, std::mt19937_64& rng);

/// Seed of sequence `index`'s private generator; shards may be generated independently.
uint64_t sequence_seed(uint64_t corpus_seed, int64_t index);

SyntheticCorpus generate_synthetic(const SyntheticFactorSpec& spec);

}  // namespace vqmd::features
