#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "p808/cleansing.hpp"
#include "p808/config.hpp"

namespace p808::platform {

enum class ActionKind { approve, reject, bonus, notify };

std::string_view to_string(ActionKind k);
ActionKind action_kind_from_string(std::string_view s);

struct PlatformAction {
  ActionKind kind = ActionKind::approve;
  std::string assignment_id;
  std::string worker_id;
  std::int64_t amount_minor = 0;  // bonus only
  std::string currency;           // bonus only
  std::string message;            // reject reason, bonus or notification text
  std::string idempotency_key;

  // Throws ValidationError: reject without message, bonus amount <= 0,
  // notify without worker, missing key.
  void validate() const;

  friend bool operator==(const PlatformAction&, const PlatformAction&) = default;
};

// SHA-256 over kind, assignment and worker: one logical action per key.
std::string idempotency_key(ActionKind kind, std::string_view assignment_id, std::string_view worker_id);

PlatformAction notify_action(std::string worker_id, std::string message);

// approve for accepted, reject (with the failed-criteria reason) otherwise,
// then bonus where due. Ordered by assignment id; each assignment's approve or
// reject precedes its bonus.
std::vector<PlatformAction> plan_actions(const std::vector<cleansing::CleansingVerdict>& verdicts,
                                         const ExperimentConfig& config);

nlohmann::json action_to_json(const PlatformAction& a);
PlatformAction action_from_json(const nlohmann::json& j);
// One JSON object per line.
std::string actions_jsonl(const std::vector<PlatformAction>& actions);

struct TransportResult {
  bool ok = false;
  std::string detail;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult send(const PlatformAction& action) = 0;
};

// Appends each delivered action as a JSON line to an outbox file. Calls whose
// 1-based index is listed in `fail_calls` fail without writing.
class FileMockTransport : public Transport {
 public:
  explicit FileMockTransport(std::filesystem::path outbox, std::set<std::size_t> fail_calls = {});

  TransportResult send(const PlatformAction& action) override;
  std::size_t calls() const { return calls_; }

 private:
  std::filesystem::path outbox_;
  std::set<std::size_t> fail_calls_;
  std::size_t calls_ = 0;
};

// Append-only record of executed actions, one JSON object per line:
//   {"key": ..., "kind": ..., "assignment_id": ..., "worker_id": ..., "status": "ok"|"failed", "detail": ...}
// A key counts as executed once a line with status "ok" exists.
class IdempotencyLedger {
 public:
  IdempotencyLedger() = default;  // in-memory only
  // Loads existing lines; a missing file is an empty ledger. Throws ParseError on a corrupt line.
  explicit IdempotencyLedger(std::filesystem::path path);

  bool executed(const std::string& key) const { return done_.contains(key); }
  void record(const PlatformAction& action, bool ok, const std::string& detail);
  std::size_t size() const { return done_.size(); }

 private:
  std::optional<std::filesystem::path> path_;
  std::set<std::string> done_;
};

enum class ActionStatus { planned, ok, failed, skipped };

std::string_view to_string(ActionStatus s);

struct ExecutionEntry {
  PlatformAction action;
  ActionStatus status = ActionStatus::planned;
  std::string detail;
};

struct ExecutionReport {
  bool dry_run = false;
  std::vector<ExecutionEntry> entries;

  std::size_t count(ActionStatus s) const;
  nlohmann::json to_json() const;
};

// Dry runs never touch the transport or the ledger; already executed keys are
// reported as skipped in both modes. Transport failures are recorded and the
// run continues. `transport` may be null only for dry runs.
ExecutionReport execute(const std::vector<PlatformAction>& actions, Transport* transport,
                        IdempotencyLedger& ledger, bool dry_run);

}  // namespace p808::platform
