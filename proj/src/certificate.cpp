#include "p808/certificate.hpp"

#include <vector>

#include "p808/crypto.hpp"
#include "p808/error.hpp"
#include "p808/numfmt.hpp"

namespace p808 {

std::string derive_client_key(std::string_view experiment_secret) {
  return crypto::hmac_sha256_hex(experiment_secret, "p808/client-certificate-key/v1");
}

std::string certificate_message(const Certificate& cert) {
  std::string msg = "p808-cert-v1\n";
  msg += to_string(cert.kind);
  msg += '\n';
  msg += cert.worker_id;
  msg += '\n';
  msg += std::to_string(cert.issued_at);
  msg += '\n';
  msg += std::to_string(cert.ttl_seconds);
  return msg;
}

Certificate sign_certificate(CertificateKind kind, std::string worker_id, Timestamp issued_at,
                             std::int64_t ttl_seconds, std::string_view client_key) {
  Certificate cert{kind, std::move(worker_id), issued_at, ttl_seconds, {}};
  cert.signature = crypto::hmac_sha256_hex(client_key, certificate_message(cert));
  return cert;
}

bool signature_matches(const Certificate& cert, std::string_view client_key) {
  return crypto::constant_time_equal(
      cert.signature, crypto::hmac_sha256_hex(client_key, certificate_message(cert)));
}

std::string encode_token(const Certificate& cert) {
  return "v1." + std::string(to_string(cert.kind)) + "." + std::to_string(cert.issued_at) + "." +
         std::to_string(cert.ttl_seconds) + "." + crypto::to_hex(cert.worker_id) + "." +
         cert.signature;
}

std::optional<Certificate> decode_token(std::string_view token) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = token.find('.', start);
    parts.push_back(token.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (parts.size() != 6 || parts[0] != "v1") return std::nullopt;

  Certificate cert;
  if (parts[1] == "qualification") {
    cert.kind = CertificateKind::qualification;
  } else if (parts[1] == "environment") {
    cert.kind = CertificateKind::environment;
  } else {
    return std::nullopt;
  }
  const auto issued = parse_int(parts[2]);
  const auto ttl = parse_int(parts[3]);
  if (!issued || !ttl || *ttl < 0) return std::nullopt;
  cert.issued_at = *issued;
  cert.ttl_seconds = *ttl;
  try {
    cert.worker_id = crypto::from_hex(parts[4]);
  } catch (const ParseError&) {
    return std::nullopt;
  }
  if (cert.worker_id.empty() || parts[5].empty()) return std::nullopt;
  cert.signature = std::string(parts[5]);
  return cert;
}

}  // namespace p808
