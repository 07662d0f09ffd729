#include "dsqa/wav.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "WAV and checkpoint I/O assume a little-endian host");

namespace dsqa {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("read_wav: truncated file");
  return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_wav: cannot open " + path.string());

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("read_wav: not a RIFF file: " + path.string());
  read_le<std::uint32_t>(in);  // overall size, unused
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("read_wav: not a WAVE file: " + path.string());

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  std::vector<char> payload;

  while (in.read(tag, 4)) {
    const std::uint32_t size = read_le<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) throw std::runtime_error("read_wav: malformed fmt chunk");
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);  // byte rate
      read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      in.ignore(size - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      payload.resize(size);
      in.read(payload.data(), size);
      if (!in) throw std::runtime_error("read_wav: truncated data chunk");
      break;
    } else {
      in.ignore(size);
    }
    if (size % 2 == 1) in.ignore(1);  // RIFF chunks are word-aligned
  }

  if (!have_fmt || payload.empty())
    throw std::runtime_error("read_wav: missing fmt or data chunk: " + path.string());
  if (channels != 1)
    throw std::runtime_error("read_wav: only mono input is supported (" +
                             std::to_string(channels) + " channels): " + path.string());

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t count = payload.size() / 2;
    w.samples.resize(count);
    const auto* raw = reinterpret_cast<const std::int16_t*>(payload.data());
    for (std::size_t i = 0; i < count; ++i)
      w.samples[static_cast<Eigen::Index>(i)] = raw[i] / 32768.0;
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t count = payload.size() / 4;
    w.samples.resize(count);
    const auto* raw = reinterpret_cast<const float*>(payload.data());
    for (std::size_t i = 0; i < count; ++i)
      w.samples[static_cast<Eigen::Index>(i)] = raw[i];
  } else {
    throw std::runtime_error("read_wav: unsupported encoding (format " + std::to_string(format) +
                             ", " + std::to_string(bits) + " bit); expected PCM16 or float32: " +
                             path.string());
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav: cannot open " + path.string());

  const std::uint32_t data_size = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, kFormatPcm);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate * 2));
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_size);

  std::vector<std::int16_t> pcm(w.samples.size());
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
    const double v = std::clamp(w.samples[i], -1.0, 1.0);
    pcm[static_cast<std::size_t>(i)] = static_cast<std::int16_t>(std::lrint(v * 32767.0));
  }
  out.write(reinterpret_cast<const char*>(pcm.data()), data_size);
  if (!out) throw std::runtime_error("write_wav: write failed: " + path.string());
}

}  // namespace dsqa
