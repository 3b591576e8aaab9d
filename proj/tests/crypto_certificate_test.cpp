#include <gtest/gtest.h>

#include "p808/certificate.hpp"
#include "p808/cleansing.hpp"
#include "p808/crypto.hpp"
#include "p808/error.hpp"

namespace {

using namespace p808;

constexpr Timestamp kNow = 1700000000;
const std::string kSecret = "experiment-secret";

std::string token(CertificateKind kind, const std::string& worker, Timestamp issued, std::int64_t ttl,
                  const std::string& secret = kSecret) {
  return encode_token(sign_certificate(kind, worker, issued, ttl, derive_client_key(secret)));
}

TEST(Crypto, KnownDigests) {
  EXPECT_EQ(crypto::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(crypto::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(crypto::hmac_sha256_hex("Jefe", "what do ya want for nothing?"),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST(Crypto, HexRoundTrip) {
  const std::string bytes("\x00\x01\xfe\xffW", 5);
  EXPECT_EQ(crypto::to_hex(bytes), "0001feff57");
  EXPECT_EQ(crypto::from_hex("0001FEff57"), bytes);
  EXPECT_THROW(crypto::from_hex("abc"), ParseError);
  EXPECT_THROW(crypto::from_hex("zz"), ParseError);
}

TEST(Crypto, ConstantTimeEqual) {
  EXPECT_TRUE(crypto::constant_time_equal("abc", "abc"));
  EXPECT_FALSE(crypto::constant_time_equal("abc", "abd"));
  EXPECT_FALSE(crypto::constant_time_equal("abc", "abcd"));
}

TEST(Certificate, TokenRoundTrip) {
  const auto cert = sign_certificate(CertificateKind::environment, "W.0:1", kNow, 1800, derive_client_key(kSecret));
  const auto t = encode_token(cert);
  EXPECT_EQ(t.rfind("v1.environment.1700000000.1800.", 0), 0u);
  const auto back = decode_token(t);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(*back, cert);
  EXPECT_TRUE(signature_matches(*back, derive_client_key(kSecret)));
  EXPECT_FALSE(signature_matches(*back, derive_client_key("other")));
}

TEST(Certificate, ClientKeyDiffersFromSecret) {
  EXPECT_NE(derive_client_key(kSecret), kSecret);
  EXPECT_EQ(derive_client_key(kSecret).size(), 64u);
  EXPECT_NE(derive_client_key(kSecret), derive_client_key("x"));
}

TEST(Certificate, DecodeRejectsMalformed) {
  for (const char* bad : {"", "v1", "v2.environment.1.1.57.ab", "v1.other.1.1.57.ab", "v1.environment.x.1.57.ab",
                          "v1.environment.1.-5.57.ab", "v1.environment.1.1.5.ab", "v1.environment.1.1..ab",
                          "v1.environment.1.1.57.", "v1.environment.1.1.57.ab.extra"}) {
    EXPECT_FALSE(decode_token(bad).has_value()) << bad;
  }
}

using cleansing::verify_certificate;

TEST(VerifyCertificate, ValidWithinTtl) {
  const auto r = verify_certificate(token(CertificateKind::environment, "W1", kNow - 60, 1800), kSecret, "W1", kNow);
  EXPECT_TRUE(r.valid);
  EXPECT_EQ(r.reason, "ok");
}

TEST(VerifyCertificate, FlippedSignatureByte) {
  auto t = token(CertificateKind::environment, "W1", kNow - 60, 1800);
  t.back() = t.back() == '0' ? '1' : '0';
  const auto r = verify_certificate(t, kSecret, "W1", kNow);
  EXPECT_FALSE(r.valid);
  EXPECT_EQ(r.reason, "bad signature");
}

TEST(VerifyCertificate, TamperedFieldsBreakSignature) {
  const auto cert = sign_certificate(CertificateKind::environment, "W1", kNow - 3000, 1800, derive_client_key(kSecret));
  auto extended = cert;
  extended.ttl_seconds = 86400;
  EXPECT_EQ(verify_certificate(encode_token(extended), kSecret, "W1", kNow).reason, "bad signature");
  auto moved = cert;
  moved.issued_at = kNow - 10;
  EXPECT_EQ(verify_certificate(encode_token(moved), kSecret, "W1", kNow).reason, "bad signature");
  EXPECT_EQ(verify_certificate(token(CertificateKind::environment, "W1", kNow, 1800, "wrong"), kSecret, "W1", kNow)
                .reason,
            "bad signature");
}

TEST(VerifyCertificate, EnvironmentExpiryBoundary) {
  const auto at = [](Timestamp issued) {
    return verify_certificate(token(CertificateKind::environment, "W1", issued, 1800), kSecret, "W1", kNow);
  };
  EXPECT_TRUE(at(kNow - 29 * 60).valid);
  EXPECT_TRUE(at(kNow - 1799).valid);
  EXPECT_EQ(at(kNow - 1800).reason, "expired");
  EXPECT_EQ(at(kNow - 31 * 60).reason, "expired");
}

TEST(VerifyCertificate, QualificationNeverExpires) {
  const auto r =
      verify_certificate(token(CertificateKind::qualification, "W1", kNow - 60LL * 86400, 0), kSecret, "W1", kNow);
  EXPECT_TRUE(r.valid);
}

TEST(VerifyCertificate, WorkerAndClockChecks) {
  EXPECT_EQ(verify_certificate(token(CertificateKind::qualification, "W1", kNow, 0), kSecret, "W2", kNow).reason,
            "worker mismatch");
  EXPECT_EQ(verify_certificate(token(CertificateKind::environment, "W1", kNow + 5, 1800), kSecret, "W1", kNow).reason,
            "issued in future");
  EXPECT_EQ(verify_certificate("garbage", kSecret, "W1", kNow).reason, "malformed");
  EXPECT_EQ(verify_certificate(token(CertificateKind::environment, "W1", kNow - 1, 0), kSecret, "W1", kNow).reason,
            "expired");
}

}  // namespace
