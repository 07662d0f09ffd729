#pragma once

#include <cstdint>
#include <vector>

#include "dsqa/features.hpp"

namespace dsqa {

// Deterministic "clean" material for desk-scale runs: harmonic tones with a
// randomized fundamental, vibrato, f0 glide, formant-like spectral shaping
// and an amplitude envelope. Not speech, but a learnable low-dimensional
// family with speech-like spectral structure.
Waveform synth_harmonic_utterance(std::uint64_t seed, double duration_s = 1.05,
                                  int sample_rate = 16000);

std::vector<Waveform> synth_clean_corpus(std::uint64_t seed, int count, double duration_s = 1.05,
                                         int sample_rate = 16000);

// Unit-variance white Gaussian noise (the default corruption source).
Waveform synth_white_noise(std::uint64_t seed, Eigen::Index n_samples, int sample_rate = 16000);

}  // namespace dsqa
