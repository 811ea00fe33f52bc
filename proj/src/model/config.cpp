#include "vqmd/model/config.hpp"

#include "vqmd/common/error.hpp"

namespace vqmd::model {

std::string to_string(Modalities m) {
  switch (m) {
    case Modalities::Both: return "none";
    case Modalities::AudioOnly: return "audio-only";
    case Modalities::VisualOnly: return "visual-only";
  }
  return "none";
}

Modalities modalities_from_string(const std::string& s) {
  if (s == "none" || s == "both") return Modalities::Both;
  if (s == "audio-only") return Modalities::AudioOnly;
  if (s == "visual-only") return Modalities::VisualOnly;
  throw ConfigError("unknown unimodal mode '" + s + "' (expected none | audio-only | visual-only)");
}

ModelConfig ModelConfig::full() { return {}; }

ModelConfig ModelConfig::desk(int64_t d_a, int64_t d_v) {
  ModelConfig c;
  c.d_a = d_a;
  c.d_v = d_v;
  c.visual_embed = {128, 64};
  c.w_gru = 64;
  c.w_dense = 64;
  c.prior_av_gru = 32;
  c.prior_av_dense = 32;
  c.posterior_av = {64, 32};
  c.prior_a_gru = 32;
  c.prior_a_dense = 16;
  c.posterior_a = {32, 16};
  c.prior_v_gru = 32;
  c.prior_v_dense = 32;
  c.posterior_v = {64, 32};
  c.visual_decoder = {64, 128};
  c.audio_decoder = {32, 64};
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.d_a = 4;
  c.d_v = 6;
  c.l_w = 3;
  c.l_av = 2;
  c.l_a = 2;
  c.l_v = 2;
  c.T_train = 3;
  c.visual_embed = {5, 4};
  c.w_gru = 3;
  c.w_dense = 4;
  c.prior_av_gru = 3;
  c.prior_av_dense = 3;
  c.posterior_av = {5, 4};
  c.prior_a_gru = 3;
  c.prior_a_dense = 3;
  c.posterior_a = {4, 3};
  c.prior_v_gru = 3;
  c.prior_v_dense = 3;
  c.posterior_v = {5, 4};
  c.visual_decoder = {4, 5};
  c.audio_decoder = {4, 5};
  return c;
}

void ModelConfig::validate() const {
  for (const auto v : {d_a, d_v, l_w, l_av, l_a, l_v, T_train, w_gru, w_dense, prior_av_gru, prior_av_dense, prior_a_gru,
                       prior_a_dense, prior_v_gru, prior_v_dense}) {
    if (v < 1) throw ConfigError("model config: all dimensions must be >= 1");
  }
  for (const auto* widths : {&visual_embed, &posterior_av, &posterior_a, &posterior_v, &visual_decoder, &audio_decoder}) {
    if (widths->empty()) throw ConfigError("model config: every dense stack needs at least one layer");
    for (const auto v : *widths) {
      if (v < 1) throw ConfigError("model config: all dimensions must be >= 1");
    }
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_a", c.d_a},
                     {"d_v", c.d_v},
                     {"l_w", c.l_w},
                     {"l_av", c.l_av},
                     {"l_a", c.l_a},
                     {"l_v", c.l_v},
                     {"T_train", c.T_train},
                     {"visual_embed", c.visual_embed},
                     {"w_gru", c.w_gru},
                     {"w_dense", c.w_dense},
                     {"prior_av_gru", c.prior_av_gru},
                     {"prior_av_dense", c.prior_av_dense},
                     {"posterior_av", c.posterior_av},
                     {"prior_a_gru", c.prior_a_gru},
                     {"prior_a_dense", c.prior_a_dense},
                     {"posterior_a", c.posterior_a},
                     {"prior_v_gru", c.prior_v_gru},
                     {"prior_v_dense", c.prior_v_dense},
                     {"posterior_v", c.posterior_v},
                     {"visual_decoder", c.visual_decoder},
                     {"audio_decoder", c.audio_decoder},
                     {"modalities", to_string(c.modalities)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  const ModelConfig d;
  c.d_a = j.value("d_a", d.d_a);
  c.d_v = j.value("d_v", d.d_v);
  c.l_w = j.value("l_w", d.l_w);
  c.l_av = j.value("l_av", d.l_av);
  c.l_a = j.value("l_a", d.l_a);
  c.l_v = j.value("l_v", d.l_v);
  c.T_train = j.value("T_train", d.T_train);
  c.visual_embed = j.value("visual_embed", d.visual_embed);
  c.w_gru = j.value("w_gru", d.w_gru);
  c.w_dense = j.value("w_dense", d.w_dense);
  c.prior_av_gru = j.value("prior_av_gru", d.prior_av_gru);
  c.prior_av_dense = j.value("prior_av_dense", d.prior_av_dense);
  c.posterior_av = j.value("posterior_av", d.posterior_av);
  c.prior_a_gru = j.value("prior_a_gru", d.prior_a_gru);
  c.prior_a_dense = j.value("prior_a_dense", d.prior_a_dense);
  c.posterior_a = j.value("posterior_a", d.posterior_a);
  c.prior_v_gru = j.value("prior_v_gru", d.prior_v_gru);
  c.prior_v_dense = j.value("prior_v_dense", d.prior_v_dense);
  c.posterior_v = j.value("posterior_v", d.posterior_v);
  c.visual_decoder = j.value("visual_decoder", d.visual_decoder);
  c.audio_decoder = j.value("audio_decoder", d.audio_decoder);
  c.modalities = modalities_from_string(j.value("modalities", std::string("none")));
}

}  // namespace vqmd::model
