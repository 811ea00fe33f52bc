#pragma once

#include <torch/torch.h>

#include <functional>
#include <string>
#include <vector>

#include "vqmd/eval/regression.hpp"
#include "vqmd/features/sequence.hpp"
#include "vqmd/model/mdvae.hpp"
#include "vqmd/transform/latent_ops.hpp"

namespace vqmd::eval {

/// Pearson correlation of two tracks after removing each track's mean.
/// Zero-variance tracks give 0.
double centered_pcc(const torch::Tensor& a, const torch::Tensor& b);
/// Mean absolute difference of the raw tracks.
double mean_absolute_error(const torch::Tensor& a, const torch::Tensor& b);

/// Maps per-frame observations (x_a [T, d_a], x_v [T, d_v]) to attribute tracks [T, n].
struct AttributeExtractor {
  std::vector<std::string> names;
  std::function<torch::Tensor(const torch::Tensor& x_a, const torch::Tensor& x_v)> extract;
};

/// Ridge regression from [x_a ; x_v] to the ground-truth tracks [c ; a ; v]
/// fitted on every frame of `sequences` (which must carry factors).
AttributeExtractor fit_factor_extractor(const std::vector<features::AVFeatureSequence>& sequences, double lambda = 1e-3);

struct AttributeScore {
  std::string name;
  double pcc_source = 0.0;     ///< output vs the sequence the swapped variable came from (A)
  double mae_source = 0.0;
  double pcc_recipient = 0.0;  ///< output vs the sequence that received it (B)
  double mae_recipient = 0.0;
};

struct SwapProtocolOptions {
  int64_t n_repeats = 5;
  int64_t n_recipients = 50;
  uint64_t seed = 0;
};

/// For each repeat: pick a source A and n_recipients other sequences B;
/// rebuild every B with `variable` taken from A; extract attribute tracks
/// from the outputs and compare them with A's and B's own tracks (PCC after
/// per-track centring, MAE on raw values). Scores are averaged over the B's
/// of a repeat and then over repeats. Extractor failures are rethrown with
/// the sequence id.
std::vector<AttributeScore> swap_protocol(model::MDVAE& model, const std::vector<features::AVFeatureSequence>& sequences,
                                          transform::Latent variable, const AttributeExtractor& extractor,
                                          const SwapProtocolOptions& options);

}  // namespace vqmd::eval
