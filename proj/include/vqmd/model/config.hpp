#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace vqmd::model {

/// Which observation streams the model handles. The single-modality variants
/// drop the other stream, its specific latent and its decoder.
enum class Modalities { Both, AudioOnly, VisualOnly };

std::string to_string(Modalities m);
Modalities modalities_from_string(const std::string& s);

/// Dimensions and layer widths of the stage-2 model. Defaults are the
/// full-size network (d_a = 512, d_v = 2048, w = 84, z_av = 16, z_a = z_v = 8).
struct ModelConfig {
  int64_t d_a = 512;
  int64_t d_v = 2048;
  int64_t l_w = 84;
  int64_t l_av = 16;
  int64_t l_a = 8;
  int64_t l_v = 8;
  int64_t T_train = 30;

  std::vector<int64_t> visual_embed{1024, 512};  // visual embedding; last entry is dim(r_v)
  int64_t w_gru = 256;                            // w recurrence, per direction
  int64_t w_dense = 256;
  int64_t prior_av_gru = 128;                     // z_av prior
  int64_t prior_av_dense = 64;
  std::vector<int64_t> posterior_av{256, 128};    // z_av posterior
  int64_t prior_a_gru = 128;                      // z_a prior
  int64_t prior_a_dense = 32;
  std::vector<int64_t> posterior_a{128, 32};      // z_a posterior
  int64_t prior_v_gru = 128;                      // z_v prior
  int64_t prior_v_dense = 64;
  std::vector<int64_t> posterior_v{256, 128};     // z_v posterior
  std::vector<int64_t> visual_decoder{512, 1024}; // visual decoder hidden widths
  std::vector<int64_t> audio_decoder{128, 256};   // audio decoder hidden widths

  Modalities modalities = Modalities::Both;

  static ModelConfig full();
  /// Narrow layers for CPU-scale experiments on (d_a, d_v) observations.
  static ModelConfig desk(int64_t d_a, int64_t d_v);
  /// Every dimension <= 6; used by finite-difference gradient checks.
  static ModelConfig tiny();

  bool has_audio() const { return modalities != Modalities::VisualOnly; }
  bool has_visual() const { return modalities != Modalities::AudioOnly; }
  int64_t r_v_dim() const { return visual_embed.back(); }
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace vqmd::model
