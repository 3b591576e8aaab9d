#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace p808 {

// Uncompressed interleaved PCM audio. Samples are kept as raw little-endian bytes.
struct PcmAudio {
  std::uint32_t sample_rate = 16000;
  std::uint16_t channels = 1;
  std::uint16_t bits_per_sample = 16;
  std::string data;

  std::size_t frame_bytes() const { return static_cast<std::size_t>(channels) * bits_per_sample / 8; }
  std::size_t frames() const { return frame_bytes() == 0 ? 0 : data.size() / frame_bytes(); }
  double duration_seconds() const {
    return sample_rate == 0 ? 0.0 : static_cast<double>(frames()) / sample_rate;
  }
  bool same_format(const PcmAudio& other) const {
    return sample_rate == other.sample_rate && channels == other.channels &&
           bits_per_sample == other.bits_per_sample;
  }
};

// Throws ParseError on anything other than a PCM RIFF/WAVE file.
PcmAudio parse_wav(std::string_view bytes);
std::string encode_wav(const PcmAudio& audio);

}  // namespace p808
