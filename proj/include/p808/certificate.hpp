#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "p808/types.hpp"

namespace p808 {

// Key used by the rating client to sign certificates. It is derived from the
// experiment secret and embedded in the HIT app; the secret itself never is.
std::string derive_client_key(std::string_view experiment_secret);

// Bytes covered by a certificate signature.
std::string certificate_message(const Certificate& cert);

Certificate sign_certificate(CertificateKind kind, std::string worker_id, Timestamp issued_at,
                             std::int64_t ttl_seconds, std::string_view client_key);

bool signature_matches(const Certificate& cert, std::string_view client_key);

// Token layout stored client-side and submitted with each answer:
//   v1.<kind>.<issued_at>.<ttl_seconds>.<hex(worker_id)>.<hex signature>
std::string encode_token(const Certificate& cert);
// nullopt when the token does not follow the layout.
std::optional<Certificate> decode_token(std::string_view token);

}  // namespace p808
