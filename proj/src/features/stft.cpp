#include "vqmd/features/stft.hpp"

#include <cmath>

#include "vqmd/common/error.hpp"

namespace vqmd::features {

namespace {

int64_t frame_centre(int64_t t, const StftConfig& cfg) {
  return std::llround(static_cast<double>(t) * cfg.sample_rate / cfg.fps);
}

}  // namespace

int64_t frame_count(int64_t n_samples, const StftConfig& cfg) {
  // Largest t with t * sr / fps < n_samples, plus one.
  const double frames = static_cast<double>(n_samples) * cfg.fps / cfg.sample_rate;
  auto count = static_cast<int64_t>(std::ceil(frames));
  while (count > 0 && frame_centre(count - 1, cfg) >= n_samples) --count;
  while (frame_centre(count, cfg) < n_samples) ++count;
  return count;
}

torch::Tensor stft_power_spectrogram(std::span<const float> waveform, const StftConfig& cfg) {
  require(cfg.sample_rate > 0 && cfg.fps > 0 && cfg.window >= 2 && cfg.window % 2 == 0,
          "stft: invalid configuration");
  require(static_cast<int64_t>(waveform.size()) >= cfg.window,
          "stft: waveform shorter than one analysis window (" + std::to_string(waveform.size()) +
              " < " + std::to_string(cfg.window) + " samples)");

  const int64_t n = static_cast<int64_t>(waveform.size());
  const int64_t frames = frame_count(n, cfg);
  const int64_t half = cfg.window / 2;

  auto segments = torch::zeros({frames, cfg.window}, torch::kFloat64);
  auto acc = segments.accessor<double, 2>();
  for (int64_t t = 0; t < frames; ++t) {
    const int64_t start = frame_centre(t, cfg) - half;
    for (int64_t i = 0; i < cfg.window; ++i) {
      const int64_t s = start + i;
      if (s >= 0 && s < n) acc[t][i] = waveform[static_cast<size_t>(s)];
    }
  }

  const auto window = torch::hann_window(cfg.window, /*periodic=*/true, torch::kFloat64);
  const auto spectrum = torch::fft::rfft(segments * window, c10::nullopt, /*dim=*/1);
  const auto power = torch::real(spectrum * torch::conj(spectrum));
  return power.clamp_min(kSpectralFloor).to(torch::kFloat32);
}

}  // namespace vqmd::features
