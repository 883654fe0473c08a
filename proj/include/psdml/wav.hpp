#pragma once

// Minimal RIFF/WAVE reader and writer for 16-bit PCM and 32-bit float.

#include <string>

#include "psdml/stft.hpp"

namespace psdml {

enum class WavFormat { kPcm16, kFloat32 };

struct WavFile {
  Audio audio;  // samples scaled to [-1, 1) for PCM
  WavFormat format = WavFormat::kPcm16;
};

/// Throws IoError on unreadable files or unsupported encodings.
WavFile read_wav(const std::string& path);

/// PCM output is clipped to the 16-bit range.
void write_wav(const std::string& path, const Audio& audio, WavFormat format);

}  // namespace psdml
