#include "p808/wav.hpp"

#include "p808/error.hpp"

namespace p808 {

namespace {

std::uint32_t read_u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t read_u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

PcmAudio parse_wav(std::string_view b) {
  if (b.size() < 12 || b.substr(0, 4) != "RIFF" || b.substr(8, 4) != "WAVE") {
    throw ParseError("not a RIFF/WAVE file");
  }
  PcmAudio audio;
  bool have_fmt = false;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const auto id = b.substr(pos, 4);
    const std::size_t size = read_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) throw ParseError("truncated WAV chunk");
    if (id == "fmt ") {
      if (size < 16) throw ParseError("short fmt chunk");
      std::uint16_t format = read_u16(b, body);
      if (format == kFormatExtensible && size >= 26) format = read_u16(b, body + 24);
      if (format != kFormatPcm) throw ParseError("WAV is not uncompressed PCM");
      audio.channels = read_u16(b, body + 2);
      audio.sample_rate = read_u32(b, body + 4);
      audio.bits_per_sample = read_u16(b, body + 14);
      if (audio.channels == 0 || audio.bits_per_sample == 0 || audio.bits_per_sample % 8 != 0) {
        throw ParseError("unsupported PCM layout");
      }
      have_fmt = true;
    } else if (id == "data") {
      audio.data = std::string(b.substr(body, size));
      have_data = true;
    }
    pos = body + size + (size & 1);  // chunks are word aligned
  }
  if (!have_fmt || !have_data) throw ParseError("WAV lacks fmt or data chunk");
  audio.data.resize(audio.frames() * audio.frame_bytes());
  return audio;
}

std::string encode_wav(const PcmAudio& a) {
  const auto data_size = static_cast<std::uint32_t>(a.data.size());
  std::string out;
  out.reserve(44 + a.data.size());
  out += "RIFF";
  put_u32(out, 36 + data_size + (data_size & 1));
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, a.channels);
  put_u32(out, a.sample_rate);
  put_u32(out, a.sample_rate * static_cast<std::uint32_t>(a.frame_bytes()));
  put_u16(out, static_cast<std::uint16_t>(a.frame_bytes()));
  put_u16(out, a.bits_per_sample);
  out += "data";
  put_u32(out, data_size);
  out += a.data;
  if (data_size & 1) out.push_back('\0');
  return out;
}

}  // namespace p808
