#include "psdml/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace psdml {

namespace {

constexpr std::uint16_t kTagPcm = 1;
constexpr std::uint16_t kTagFloat = 3;
constexpr std::uint16_t kTagExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace

WavFile read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("'" + path + "' is not a RIFF/WAVE file");
  }

  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw IoError("'" + path + "': truncated fmt chunk");
      tag = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (tag == kTagExtensible && avail >= 26) tag = le16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (channels == 0) throw IoError("'" + path + "': missing fmt chunk");
  if (data == nullptr) throw IoError("'" + path + "': missing data chunk");

  WavFile out;
  if (tag == kTagPcm && bits == 16) {
    out.format = WavFormat::kPcm16;
  } else if (tag == kTagFloat && bits == 32) {
    out.format = WavFormat::kFloat32;
  } else {
    throw IoError("'" + path + "': unsupported encoding (format " + std::to_string(tag) + ", " +
                  std::to_string(bits) + " bits); use 16-bit PCM or 32-bit float");
  }
  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);
  out.audio.sample_rate = rate;
  out.audio.samples.resize(static_cast<Eigen::Index>(frames), channels);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * width;
      double v;
      if (out.format == WavFormat::kPcm16) {
        v = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        const std::uint32_t u = le32(p);
        float f;
        std::memcpy(&f, &u, sizeof f);
        v = f;
      }
      out.audio.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return out;
}

void write_wav(const std::string& path, const Audio& audio, WavFormat format) {
  const std::uint16_t channels = static_cast<std::uint16_t>(audio.channels());
  if (channels == 0) throw InvalidArgument("write_wav: no channels");
  const std::uint16_t bits = format == WavFormat::kPcm16 ? 16 : 32;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  const std::size_t frames = static_cast<std::size_t>(audio.length());
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * channels * (bits / 8));

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, format == WavFormat::kPcm16 ? kTagPcm : kTagFloat);
  put16(out, channels);
  put32(out, rate);
  put32(out, rate * channels * (bits / 8));
  put16(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  put16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_size);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = audio.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      if (format == WavFormat::kPcm16) {
        const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
      } else {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, sizeof u);
        put32(out, u);
      }
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("write to '" + path + "' failed");
}

}  // namespace psdml
