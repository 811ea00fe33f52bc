#pragma once

#include <torch/torch.h>

#include <span>

namespace vqmd::features {

inline constexpr double kSpectralFloor = 1e-10;

struct StftConfig {
  int sample_rate = 16000;
  int window = 1024;  // 64 ms at 16 kHz
  double fps = 30.0;
};

/// Number of frames whose centre round(t * sr / fps) falls inside a waveform of `n_samples`.
int64_t frame_count(int64_t n_samples, const StftConfig& cfg);

/// Frame-synchronous power spectrogram, T x (window/2 + 1).
///
/// Frame t is |FFT|^2 of a periodic-Hann-weighted window centred on sample
/// round(t * sample_rate / fps). Samples outside the waveform are zeros, and
/// every bin is floored at kSpectralFloor. Using the exact fractional hop
/// (533.33 samples at 16 kHz / 30 fps) keeps audio and video frames aligned
/// over arbitrarily long recordings.
torch::Tensor stft_power_spectrogram(std::span<const float> waveform, const StftConfig& cfg = {});

}  // namespace vqmd::features
