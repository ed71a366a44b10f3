#include "spk/audio.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace spk::audio {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
  return std::uint16_t(p[0]) | std::uint16_t(p[1]) << 8;
}

void write_u32(std::ostream& os, std::uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                        static_cast<unsigned char>(x >> 16),
                        static_cast<unsigned char>(x >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ostream& os, std::uint16_t x) {
  unsigned char b[2] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

Waveform load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw AudioError(AudioErrc::MissingFile, "cannot open wav file: " + path);

  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw AudioError(AudioErrc::BadContainer, "not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* hdr = buf.data() + pos;
    std::uint32_t chunk_len = read_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (pos + 8 + chunk_len > buf.size())
      chunk_len = static_cast<std::uint32_t>(buf.size() - pos - 8);
    if (std::memcmp(hdr, "fmt ", 4) == 0 && chunk_len >= 16) {
      format = read_u16(body);
      channels = read_u16(body + 2);
      sample_rate = read_u32(body + 4);
      bits = read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt)
    throw AudioError(AudioErrc::BadContainer, "missing fmt chunk: " + path);
  if (format != 1 || bits != 16)
    throw AudioError(AudioErrc::UnsupportedEncoding,
                     "expected 16-bit PCM, got format=" + std::to_string(format) +
                         " bits=" + std::to_string(bits));
  if (channels == 0 || sample_rate == 0)
    throw AudioError(AudioErrc::BadContainer, "bad fmt chunk: " + path);
  if (data == nullptr || data_len < 2 * channels)
    throw AudioError(AudioErrc::EmptyAudio, "empty audio: " + path);

  const std::size_t frames = data_len / (2 * channels);
  Waveform w;
  w.sample_rate = static_cast<int>(sample_rate);
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      std::int16_t s =
          static_cast<std::int16_t>(read_u16(data + 2 * (i * channels + c)));
      acc += s / 32768.0;
    }
    w.samples[i] = acc / channels;
  }
  return w;
}

void save_wav(const std::string& path, const Waveform& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw AudioError(AudioErrc::MissingFile, "cannot create wav file: " + path);
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
  f.write("RIFF", 4);
  write_u32(f, 36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_u32(f, 16);
  write_u16(f, 1);  // PCM
  write_u16(f, 1);  // mono
  write_u32(f, static_cast<std::uint32_t>(w.sample_rate));
  write_u32(f, static_cast<std::uint32_t>(w.sample_rate) * 2);
  write_u16(f, 2);
  write_u16(f, 16);
  f.write("data", 4);
  write_u32(f, data_len);
  for (double x : w.samples) {
    double clamped = std::clamp(x, -1.0, 32767.0 / 32768.0);
    auto s = static_cast<std::int16_t>(std::lrint(clamped * 32768.0));
    write_u16(f, static_cast<std::uint16_t>(s));
  }
}

Waveform repeat_extend_crop(const Waveform& w, std::size_t offset, std::size_t length) {
  if (w.samples.empty())
    throw AudioError(AudioErrc::EmptyAudio, "repeat_extend_crop on empty waveform");
  if (offset >= w.size())
    throw AudioError(AudioErrc::BadArgument, "offset out of range");
  if (length == 0)
    throw AudioError(AudioErrc::BadArgument, "zero crop length");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(length);
  const std::size_t n = w.size();
  std::size_t src = offset;
  for (std::size_t i = 0; i < length; ++i) {
    out.samples[i] = w.samples[src];
    if (++src == n) src = 0;
  }
  return out;
}

Waveform time_reverse(const Waveform& w) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.rbegin(), w.samples.rend());
  return out;
}

Waveform sample_training_crop(const Waveform& w, const AugmentPolicy& policy,
                              rng::Stream& rng) {
  if (policy.crop_len == 0)
    throw AudioError(AudioErrc::BadArgument, "crop_len must be >= 1");
  if (policy.enabled) {
    const std::size_t offset = rng::uniform_index(rng, w.size());
    Waveform crop = repeat_extend_crop(w, offset, policy.crop_len);
    if (rng::uniform01(rng) < policy.reverse_prob) crop = time_reverse(crop);
    return crop;
  }
  // Plain crop: contiguous, zero-padded tail for short signals.
  const std::size_t span =
      w.size() > policy.crop_len ? w.size() - policy.crop_len : 0;
  const std::size_t offset = span == 0 ? 0 : rng::uniform_index(rng, span + 1);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(policy.crop_len, 0.0);
  const std::size_t avail = std::min(policy.crop_len, w.size() - offset);
  std::copy_n(w.samples.begin() + static_cast<std::ptrdiff_t>(offset), avail,
              out.samples.begin());
  return out;
}

}  // namespace spk::audio
