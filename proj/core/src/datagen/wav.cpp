#include "cadd/datagen/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cadd/errors.hpp"

namespace cadd::datagen {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}
std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}
bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

std::int16_t to_pcm(double x) {
  return static_cast<std::int16_t>(std::lround(std::clamp(x, -1.0, 1.0) * 32767.0));
}

}  // namespace

double quantize_pcm16(double x) { return static_cast<double>(to_pcm(x)) / 32767.0; }

std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& wave) {
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double x : wave.samples) put_u16(out, static_cast<std::uint16_t>(to_pcm(x)));
  return out;
}

Waveform decode_wav_pcm16(std::span<const std::uint8_t> b) {
  if (b.size() < 12 || !tag_is(b, 0, "RIFF") || !tag_is(b, 8, "WAVE")) {
    throw ValidationError("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = get_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) throw ValidationError("truncated WAV chunk");
    if (tag_is(b, pos, "fmt ")) {
      if (size < 16) throw ValidationError("short fmt chunk");
      const auto format = get_u16(b, body);
      const auto channels = get_u16(b, body + 2);
      const auto rate = get_u32(b, body + 4);
      const auto bits = get_u16(b, body + 14);
      if (format != 1) throw ValidationError("WAV is not PCM");
      if (channels != 1) throw ValidationError("WAV must be mono");
      if (rate != static_cast<std::uint32_t>(kSampleRate)) throw ValidationError("WAV must be 16 kHz");
      if (bits != 16) throw ValidationError("WAV must be 16-bit");
      have_fmt = true;
    } else if (tag_is(b, pos, "data")) {
      if (!have_fmt) throw ValidationError("WAV data chunk before fmt chunk");
      if (size % 2 != 0) throw ValidationError("odd PCM16 data size");
      Waveform w;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(get_u16(b, body + 2 * i));
        w.samples[i] = std::max(-1.0, static_cast<double>(raw) / 32767.0);
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw ValidationError("WAV has no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const auto bytes = encode_wav_pcm16(wave);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_wav_pcm16(bytes);
}

}  // namespace cadd::datagen
