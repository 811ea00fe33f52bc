#pragma once

#include <torch/torch.h>

#include <optional>
#include <string>
#include <vector>

namespace vqmd::features {

/// Ground-truth generating factors of one synthetic sequence.
struct GroundTruthFactors {
  int64_t s_id = 0;    ///< identity label
  int64_t s_cls = 0;   ///< static class label
  torch::Tensor c;     ///< T x dim_shared_dyn, shared dynamics
  torch::Tensor a;     ///< T x dim_audio_dyn, audio-only dynamics
  torch::Tensor v;     ///< T x dim_visual_dyn, visual-only dynamics
};

/// Paired per-frame audio / visual observations. Rows are frames.
struct AVFeatureSequence {
  torch::Tensor x_a;  ///< T x d_a
  torch::Tensor x_v;  ///< T x d_v
  std::string id;
  std::optional<GroundTruthFactors> factors;

  int64_t length() const { return x_a.defined() ? x_a.size(0) : 0; }

  /// Throws InvalidInput unless both matrices are 2-D, share T and are finite.
  void validate() const;

  /// Frames [begin, end) of every per-frame field, factors included.
  AVFeatureSequence slice(int64_t begin, int64_t end) const;
};

/// Raw audiovisual input: a waveform plus RGB frames (H x W x 3, values in [0,1]).
struct RawAVSequence {
  std::vector<float> waveform;
  std::vector<torch::Tensor> frames;
  double fps = 30.0;
  int sample_rate = 16000;
};

}  // namespace vqmd::features
