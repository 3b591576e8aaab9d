#include "p808/platform.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "p808/crypto.hpp"
#include "p808/error.hpp"

namespace p808::platform {

namespace {

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw ConfigError("cannot open " + path.string() + " for appending");
  out << line << '\n';
  out.flush();
  if (!out) throw ConfigError("write to " + path.string() + " failed");
}

}  // namespace

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::approve: return "approve";
    case ActionKind::reject: return "reject";
    case ActionKind::bonus: return "bonus";
    case ActionKind::notify: return "notify";
  }
  return "approve";
}

ActionKind action_kind_from_string(std::string_view s) {
  for (auto k : {ActionKind::approve, ActionKind::reject, ActionKind::bonus, ActionKind::notify}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown action kind '" + std::string(s) + "'");
}

std::string_view to_string(ActionStatus s) {
  switch (s) {
    case ActionStatus::planned: return "planned";
    case ActionStatus::ok: return "ok";
    case ActionStatus::failed: return "failed";
    case ActionStatus::skipped: return "skipped";
  }
  return "planned";
}

void PlatformAction::validate() const {
  if (idempotency_key.empty()) throw ValidationError("action lacks an idempotency key");
  switch (kind) {
    case ActionKind::approve:
      if (assignment_id.empty()) throw ValidationError("approve needs an assignment id");
      break;
    case ActionKind::reject:
      if (assignment_id.empty()) throw ValidationError("reject needs an assignment id");
      if (message.empty()) throw ValidationError("reject needs a reason message");
      break;
    case ActionKind::bonus:
      if (worker_id.empty()) throw ValidationError("bonus needs a worker id");
      if (amount_minor <= 0) throw ValidationError("bonus amount must be positive");
      break;
    case ActionKind::notify:
      if (worker_id.empty()) throw ValidationError("notify needs a worker id");
      if (message.empty()) throw ValidationError("notify needs a message");
      break;
  }
}

std::string idempotency_key(ActionKind kind, std::string_view assignment_id, std::string_view worker_id) {
  std::string msg = "p808-action-v1\n";
  msg += to_string(kind);
  msg += '\n';
  msg += assignment_id;
  msg += '\n';
  msg += worker_id;
  return crypto::sha256_hex(msg);
}

PlatformAction notify_action(std::string worker_id, std::string message) {
  PlatformAction a;
  a.kind = ActionKind::notify;
  a.worker_id = std::move(worker_id);
  a.message = std::move(message);
  // Notifications are keyed by their text so the same note is not sent twice.
  a.idempotency_key = idempotency_key(ActionKind::notify, crypto::sha256_hex(a.message), a.worker_id);
  return a;
}

std::vector<PlatformAction> plan_actions(const std::vector<cleansing::CleansingVerdict>& verdicts,
                                         const ExperimentConfig& config) {
  std::vector<const cleansing::CleansingVerdict*> sorted;
  for (const auto& v : verdicts) sorted.push_back(&v);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](auto* a, auto* b) { return a->assignment_id < b->assignment_id; });

  std::vector<PlatformAction> out;
  for (const auto* v : sorted) {
    PlatformAction a;
    a.assignment_id = v->assignment_id;
    a.worker_id = v->worker_id;
    if (v->accepted) {
      a.kind = ActionKind::approve;
    } else {
      a.kind = ActionKind::reject;
      a.message = cleansing::rejection_reason(*v);
    }
    a.idempotency_key = idempotency_key(a.kind, a.assignment_id, a.worker_id);
    out.push_back(std::move(a));

    if (v->bonus_due && config.bonus.amount_minor > 0) {
      PlatformAction b;
      b.kind = ActionKind::bonus;
      b.assignment_id = v->assignment_id;
      b.worker_id = v->worker_id;
      b.amount_minor = config.bonus.amount_minor;
      b.currency = config.bonus.currency;
      b.message = config.bonus.message;
      b.idempotency_key = idempotency_key(b.kind, b.assignment_id, b.worker_id);
      out.push_back(std::move(b));
    }
  }
  return out;
}

nlohmann::json action_to_json(const PlatformAction& a) {
  nlohmann::json j{{"kind", to_string(a.kind)},
                   {"assignment_id", a.assignment_id},
                   {"worker_id", a.worker_id},
                   {"message", a.message},
                   {"idempotency_key", a.idempotency_key}};
  if (a.kind == ActionKind::bonus) {
    j["amount_minor"] = a.amount_minor;
    j["currency"] = a.currency;
  }
  return j;
}

PlatformAction action_from_json(const nlohmann::json& j) {
  try {
    PlatformAction a;
    a.kind = action_kind_from_string(j.at("kind").get<std::string>());
    a.assignment_id = j.value("assignment_id", "");
    a.worker_id = j.value("worker_id", "");
    a.message = j.value("message", "");
    a.idempotency_key = j.at("idempotency_key").get<std::string>();
    a.amount_minor = j.value("amount_minor", std::int64_t{0});
    a.currency = j.value("currency", "");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid action record: ") + e.what());
  }
}

std::string actions_jsonl(const std::vector<PlatformAction>& actions) {
  std::string out;
  for (const auto& a : actions) {
    out += action_to_json(a).dump();
    out += '\n';
  }
  return out;
}

FileMockTransport::FileMockTransport(std::filesystem::path outbox, std::set<std::size_t> fail_calls)
    : outbox_(std::move(outbox)), fail_calls_(std::move(fail_calls)) {}

TransportResult FileMockTransport::send(const PlatformAction& action) {
  ++calls_;
  if (fail_calls_.contains(calls_)) return {false, "injected failure on call " + std::to_string(calls_)};
  append_line(outbox_, action_to_json(action).dump());
  return {true, "delivered"};
}

IdempotencyLedger::IdempotencyLedger(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("status").get<std::string>() == "ok") done_.insert(j.at("key").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("ledger line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void IdempotencyLedger::record(const PlatformAction& action, bool ok, const std::string& detail) {
  if (path_) {
    const nlohmann::json j{{"key", action.idempotency_key},
                           {"kind", to_string(action.kind)},
                           {"assignment_id", action.assignment_id},
                           {"worker_id", action.worker_id},
                           {"status", ok ? "ok" : "failed"},
                           {"detail", detail}};
    append_line(*path_, j.dump());
  }
  if (ok) done_.insert(action.idempotency_key);
}

std::size_t ExecutionReport::count(ActionStatus s) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ExecutionEntry& e) { return e.status == s; }));
}

nlohmann::json ExecutionReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    auto j = action_to_json(e.action);
    j["status"] = to_string(e.status);
    j["detail"] = e.detail;
    list.push_back(std::move(j));
  }
  nlohmann::json counts;
  for (auto s : {ActionStatus::planned, ActionStatus::ok, ActionStatus::failed, ActionStatus::skipped}) {
    counts[std::string(to_string(s))] = count(s);
  }
  return {{"dry_run", dry_run}, {"counts", counts}, {"actions", list}};
}

ExecutionReport execute(const std::vector<PlatformAction>& actions, Transport* transport,
                        IdempotencyLedger& ledger, bool dry_run) {
  if (!dry_run && transport == nullptr) throw ConfigError("a transport is required unless dry-running");
  ExecutionReport report;
  report.dry_run = dry_run;
  std::set<std::string> seen;
  for (const auto& action : actions) {
    action.validate();
    ExecutionEntry entry{action, ActionStatus::planned, ""};
    if (ledger.executed(action.idempotency_key)) {
      entry.status = ActionStatus::skipped;
      entry.detail = "already executed";
    } else if (!seen.insert(action.idempotency_key).second) {
      entry.status = ActionStatus::skipped;
      entry.detail = "duplicate key in plan";
    } else if (!dry_run) {
      TransportResult r;
      try {
        r = transport->send(action);
      } catch (const std::exception& e) {
        r = {false, e.what()};
      }
      entry.status = r.ok ? ActionStatus::ok : ActionStatus::failed;
      entry.detail = r.detail;
      ledger.record(action, r.ok, r.detail);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace p808::platform
