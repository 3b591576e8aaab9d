#include <gtest/gtest.h>

#include <cstring>

#include "p808/error.hpp"
#include "p808/test_builder.hpp"
#include "p808/wav.hpp"

namespace {

using namespace p808;

PcmAudio tone(double seconds, std::uint32_t rate = 16000, std::uint16_t channels = 1, char fill = 1) {
  PcmAudio a;
  a.sample_rate = rate;
  a.channels = channels;
  a.bits_per_sample = 16;
  a.data.assign(static_cast<std::size_t>(seconds * rate) * a.frame_bytes(), fill);
  return a;
}

void put_u32(std::string& s, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s[at + static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
}

TEST(Wav, EncodeParseRoundTrip) {
  auto a = tone(0.5, 8000, 2, 7);
  const auto bytes = encode_wav(a);
  EXPECT_EQ(bytes.size(), 44 + a.data.size());
  EXPECT_EQ(bytes.substr(0, 4), "RIFF");
  EXPECT_EQ(bytes.substr(8, 4), "WAVE");
  const auto back = parse_wav(bytes);
  EXPECT_TRUE(back.same_format(a));
  EXPECT_EQ(back.data, a.data);
  EXPECT_DOUBLE_EQ(back.duration_seconds(), 0.5);
}

TEST(Wav, SkipsUnknownChunks) {
  const auto a = tone(0.1);
  auto bytes = encode_wav(a);
  std::string extra = "LIST";
  extra += std::string("\x04\x00\x00\x00", 4);
  extra += "abcd";
  bytes.insert(12, extra);
  put_u32(bytes, 4, static_cast<std::uint32_t>(bytes.size() - 8));
  EXPECT_EQ(parse_wav(bytes).data, a.data);
}

TEST(Wav, RejectsInvalidFiles) {
  EXPECT_THROW(parse_wav("not a wav"), ParseError);
  auto bytes = encode_wav(tone(0.1));
  auto truncated = bytes.substr(0, bytes.size() - 10);
  EXPECT_THROW(parse_wav(truncated), ParseError);
  auto compressed = bytes;
  compressed[20] = 3;  // IEEE float format tag
  EXPECT_THROW(parse_wav(compressed), ParseError);
}

TEST(TrappingClip, LengthArithmetic) {
  const auto source = tone(10.0, 16000, 1, 1), message = tone(4.0, 16000, 1, 2);
  const auto clip = builder::create_trapping_clip(source, message, 2, 3.0);
  EXPECT_DOUBLE_EQ(clip.audio.duration_seconds(), 7.0);
  EXPECT_EQ(clip.prefix_frames, 48000u);
  EXPECT_EQ(clip.message_frames, 64000u);
  EXPECT_EQ(clip.audio.frames(), clip.prefix_frames + clip.message_frames);
  EXPECT_EQ(clip.expected_answer, 2);
  EXPECT_EQ(clip.audio.data.substr(0, 96000), source.data.substr(0, 96000));
  EXPECT_EQ(clip.audio.data.substr(96000), message.data);
}

TEST(TrappingClip, RejectsMismatches) {
  const auto source = tone(2.0);
  EXPECT_THROW(builder::create_trapping_clip(source, tone(1.0, 8000), 2), ValidationError);
  EXPECT_THROW(builder::create_trapping_clip(source, tone(1.0, 16000, 2), 2), ValidationError);
  EXPECT_THROW(builder::create_trapping_clip(source, tone(1.0), 2, 3.0), ValidationError);
  EXPECT_THROW(builder::create_trapping_clip(source, tone(1.0), 2, -1.0), ValidationError);
}

}  // namespace
