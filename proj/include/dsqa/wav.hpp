#pragma once

#include <filesystem>

#include "dsqa/features.hpp"

namespace dsqa {

// RIFF/WAVE reader for mono PCM 16-bit and IEEE float 32-bit files. Stereo
// and other encodings are rejected with a descriptive error.
Waveform read_wav(const std::filesystem::path& path);

// Mono PCM 16-bit writer; samples are clamped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace dsqa
