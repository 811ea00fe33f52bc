#include "vqmd/features/sequence.hpp"

#include "vqmd/common/error.hpp"

namespace vqmd::features {

void AVFeatureSequence::validate() const {
  require(x_a.defined() && x_v.defined(), "sequence " + id + ": missing modality");
  require(x_a.dim() == 2 && x_v.dim() == 2, "sequence " + id + ": observations must be T x d matrices");
  require(x_a.size(0) == x_v.size(0), "sequence " + id + ": audio and visual frame counts differ (" +
                                          std::to_string(x_a.size(0)) + " vs " +
                                          std::to_string(x_v.size(0)) + ")");
  require(torch::isfinite(x_a).all().item<bool>() && torch::isfinite(x_v).all().item<bool>(),
          "sequence " + id + ": non-finite observation");
}

AVFeatureSequence AVFeatureSequence::slice(int64_t begin, int64_t end) const {
  require(begin >= 0 && begin < end && end <= length(), "sequence " + id + ": bad slice");
  AVFeatureSequence out{x_a.slice(0, begin, end), x_v.slice(0, begin, end), id, std::nullopt};
  if (factors) {
    out.factors = GroundTruthFactors{factors->s_id, factors->s_cls, factors->c.slice(0, begin, end),
                                     factors->a.slice(0, begin, end), factors->v.slice(0, begin, end)};
  }
  return out;
}

}  // namespace vqmd::features
