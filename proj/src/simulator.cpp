#include "p808/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "p808/certificate.hpp"
#include "p808/crypto.hpp"
#include "p808/csv.hpp"
#include "p808/error.hpp"
#include "p808/numfmt.hpp"

namespace p808::sim {

namespace {

constexpr ArchetypeKind kKinds[] = {ArchetypeKind::reliable, ArchetypeKind::spammer,
                                    ArchetypeKind::noisy_env, ArchetypeKind::no_headset};

bool chance(Rng& rng, double p) { return std::bernoulli_distribution(std::clamp(p, 0.0, 1.0))(rng); }

int uniform_answer(const RatingScale& scale, Rng& rng) {
  return std::uniform_int_distribution<int>(scale.min, scale.max)(rng);
}

std::string padded(std::string_view prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, n);
  return std::string(prefix) + buf;
}

struct WorkerState {
  bool disabled = false;
  bool qualified_section_done = false;
  Timestamp busy_until = 0;
  std::optional<std::string> qualification_token;
  std::optional<Certificate> env_certificate;
  std::set<std::string> rated;  // stimulus ids
};

}  // namespace

std::string_view to_string(ArchetypeKind k) {
  switch (k) {
    case ArchetypeKind::reliable: return "reliable";
    case ArchetypeKind::spammer: return "spammer";
    case ArchetypeKind::noisy_env: return "noisy_env";
    case ArchetypeKind::no_headset: return "no_headset";
  }
  return "reliable";
}

ArchetypeKind archetype_from_string(std::string_view s) {
  for (auto k : kKinds) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown worker archetype '" + std::string(s) + "'");
}

void WorkerArchetype::validate() const {
  const std::pair<const char*, double> probs[] = {
      {"trapping_accuracy", trapping_accuracy}, {"env_accuracy", env_accuracy},
      {"playback_completion", playback_completion}, {"earpods_accuracy", earpods_accuracy},
      {"qualification_pass", qualification_pass}, {"headset_probability", headset_probability}};
  for (const auto& [name, p] : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
  }
  if (!(noise_sd >= 0.0)) throw ValidationError("noise_sd must be >= 0");
  if (!(bias_sd >= 0.0)) throw ValidationError("bias_sd must be >= 0");
  if (!std::isfinite(bias)) throw ValidationError("bias must be finite");
}

WorkerArchetype WorkerArchetype::defaults(ArchetypeKind kind) {
  WorkerArchetype a;
  a.kind = kind;
  a.bias_sd = 0.15;
  switch (kind) {
    case ArchetypeKind::reliable:
      a.trapping_accuracy = 0.98;
      a.env_accuracy = 0.99;
      a.playback_completion = 0.98;
      a.earpods_accuracy = 0.98;
      break;
    case ArchetypeKind::spammer:
      a.uniform_ratings = true;
      a.trapping_accuracy = 0.0;
      a.env_accuracy = 0.0;
      a.playback_completion = 0.8;
      a.earpods_accuracy = 0.5;
      break;
    case ArchetypeKind::noisy_env:
      a.noise_sd = 1.0;
      a.bias_sd = 0.3;
      a.trapping_accuracy = 0.95;
      a.env_accuracy = 0.6;
      a.playback_completion = 0.98;
      a.earpods_accuracy = 0.95;
      break;
    case ArchetypeKind::no_headset:
      a.noise_sd = 0.7;
      a.trapping_accuracy = 0.95;
      a.env_accuracy = 0.9;
      a.playback_completion = 0.98;
      a.earpods_accuracy = 0.7;
      a.headset_probability = 0.0;
      break;
  }
  return a;
}

void to_json(nlohmann::json& j, const WorkerArchetype& a) {
  j = {{"kind", to_string(a.kind)},
       {"bias", a.bias},
       {"bias_sd", a.bias_sd},
       {"noise_sd", a.noise_sd},
       {"uniform_ratings", a.uniform_ratings},
       {"trapping_accuracy", a.trapping_accuracy},
       {"env_accuracy", a.env_accuracy},
       {"playback_completion", a.playback_completion},
       {"earpods_accuracy", a.earpods_accuracy},
       {"qualification_pass", a.qualification_pass},
       {"headset_probability", a.headset_probability}};
}

void from_json(const nlohmann::json& j, WorkerArchetype& a) {
  a = WorkerArchetype::defaults(archetype_from_string(j.at("kind").get<std::string>()));
  a.bias = j.value("bias", a.bias);
  a.bias_sd = j.value("bias_sd", a.bias_sd);
  a.noise_sd = j.value("noise_sd", a.noise_sd);
  a.uniform_ratings = j.value("uniform_ratings", a.uniform_ratings);
  a.trapping_accuracy = j.value("trapping_accuracy", a.trapping_accuracy);
  a.env_accuracy = j.value("env_accuracy", a.env_accuracy);
  a.playback_completion = j.value("playback_completion", a.playback_completion);
  a.earpods_accuracy = j.value("earpods_accuracy", a.earpods_accuracy);
  a.qualification_pass = j.value("qualification_pass", a.qualification_pass);
  a.headset_probability = j.value("headset_probability", a.headset_probability);
}

void PopulationSpec::validate() const {
  if (size == 0) throw ValidationError("population size must be positive");
  if (shares.empty()) throw ValidationError("population needs at least one archetype");
  double sum = 0;
  for (const auto& s : shares) {
    if (!(s.fraction >= 0.0)) throw ValidationError("archetype fractions must be non-negative");
    s.archetype.validate();
    sum += s.fraction;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("archetype fractions must sum to 1");
}

PopulationSpec parse_population(std::string_view json_text) {
  PopulationSpec spec;
  try {
    const auto j = nlohmann::json::parse(json_text);
    spec.size = j.at("size").get<std::size_t>();
    for (const auto& item : j.at("archetypes")) {
      PopulationShare share;
      share.archetype = item.get<WorkerArchetype>();
      share.fraction = item.at("fraction").get<double>();
      spec.shares.push_back(std::move(share));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid population spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::vector<std::size_t> share_counts(const PopulationSpec& spec) {
  spec.validate();
  std::vector<std::size_t> counts(spec.shares.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < spec.shares.size(); ++i) {
    const double exact = spec.shares[i].fraction * static_cast<double>(spec.size);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[i];
    remainders.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < spec.size; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
  return counts;
}

std::vector<SimWorker> synthesize_population(const PopulationSpec& spec, std::uint64_t seed) {
  const auto counts = share_counts(spec);
  Rng rng(derive_seed(seed, 1));
  std::vector<SimWorker> workers;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& a = spec.shares[i].archetype;
    for (std::size_t k = 0; k < counts[i]; ++k) {
      SimWorker w;
      w.archetype = a;
      w.bias = a.bias_sd > 0 ? std::normal_distribution<double>(a.bias, a.bias_sd)(rng) : a.bias;
      workers.push_back(std::move(w));
    }
  }
  std::shuffle(workers.begin(), workers.end(), rng);
  for (std::size_t i = 0; i < workers.size(); ++i) {
    workers[i].id = padded("W", i + 1, 4);
    workers[i].fingerprint =
        crypto::sha256_hex("fp:" + workers[i].id + ":" + std::to_string(seed)).substr(0, 16);
  }
  return workers;
}

LatentQuality parse_latent(std::string_view csv_text) {
  const auto t = csv::parse(csv_text);
  const auto cond = t.column("condition");
  const auto val = t.column("latent");
  if (!cond || !val) throw ParseError("latent CSV needs columns 'condition' and 'latent'");
  LatentQuality out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (row.size() != t.header.size()) throw ParseError("ragged latent row " + std::to_string(i + 1));
    const auto v = parse_double(row[*val]);
    if (!v) throw ParseError("invalid latent score in row " + std::to_string(i + 1));
    if (!out.emplace(row[*cond], *v).second) {
      throw ParseError("duplicate latent condition '" + row[*cond] + "'");
    }
  }
  return out;
}

void validate_latent(const LatentQuality& latent, const RatingScale& scale) {
  for (const auto& [c, v] : latent) {
    if (!(v >= scale.min && v <= scale.max)) {
      throw ValidationError("latent score of '" + c + "' lies outside the scale");
    }
  }
}

int draw_rating(double latent, double bias, double noise_sd, const RatingScale& scale, Rng& rng) {
  double v = latent + bias;
  if (noise_sd > 0) v += std::normal_distribution<double>(0.0, noise_sd)(rng);
  return std::clamp(static_cast<int>(std::lround(v)), scale.min, scale.max);
}

SimulatedRun simulate_run(const builder::TestPlan& plan, const ExperimentConfig& config,
                          const std::vector<SimWorker>& workers, const LatentQuality& latent,
                          const RunOptions& options, std::uint64_t seed) {
  if (workers.empty()) throw ValidationError("simulation needs at least one worker");
  const auto& scale = plan.scale;
  validate_latent(latent, scale);
  for (const auto& s : plan.sessions) {
    for (const auto& st : s.rating_stimuli) {
      if (!st.condition || !latent.contains(*st.condition)) {
        throw ValidationError("stimulus '" + st.id + "' has no latent score for condition '" +
                              st.condition.value_or("") + "'");
      }
    }
  }
  for (const auto& w : workers) w.archetype.validate();

  const std::string client_key = derive_client_key(options.secret);
  const int pair_count = config.environment.enabled ? config.environment.pair_count : 0;
  const int earpods_key = config.earpods_answer.value_or(1);

  SimulatedRun out;
  for (const auto& w : workers) out.worker_kinds[w.id] = w.archetype.kind;

  std::vector<WorkerState> state(workers.size());
  Rng sched(derive_seed(seed, 2));
  Timestamp now = options.start_time;

  for (std::size_t si = 0; si < plan.sessions.size(); ++si) {
    const auto& session = plan.sessions[si];
    now += static_cast<Timestamp>(std::exponential_distribution<double>(1.0 / 60.0)(sched));

    auto eligible_for = [&](std::size_t wi) {
      const auto& st = state[wi];
      if (st.disabled) return false;
      return std::none_of(session.rating_stimuli.begin(), session.rating_stimuli.end(),
                          [&](const Stimulus& s) { return st.rated.contains(s.id); });
    };
    std::vector<std::size_t> candidates;
    for (std::size_t wi = 0; wi < workers.size(); ++wi) {
      if (eligible_for(wi)) candidates.push_back(wi);
    }
    if (candidates.empty()) {
      throw ValidationError("no eligible worker left for session " + session.session_id +
                            "; enlarge the population");
    }
    std::vector<std::size_t> idle;
    for (auto wi : candidates) {
      if (state[wi].busy_until <= now) idle.push_back(wi);
    }
    if (idle.empty()) {
      Timestamp next = state[candidates.front()].busy_until;
      for (auto wi : candidates) next = std::min(next, state[wi].busy_until);
      now = next;
      for (auto wi : candidates) {
        if (state[wi].busy_until <= now) idle.push_back(wi);
      }
    }
    const std::size_t wi = idle[std::uniform_int_distribution<std::size_t>(0, idle.size() - 1)(sched)];
    const auto& worker = workers[wi];
    const auto& a = worker.archetype;
    auto& st = state[wi];

    Rng rng(derive_seed(seed, 3, si));
    const Timestamp start = now;
    const Timestamp submit = start + std::uniform_int_distribution<Timestamp>(300, 600)(rng);
    st.busy_until = submit + std::uniform_int_distribution<Timestamp>(30, 3600)(rng);

    ingest::Submission sub;
    sub.assignment_id = padded(options.assignment_prefix, si + 1, 6);
    sub.worker_id = worker.id;
    sub.session_id = session.session_id;
    sub.submit_time = submit;
    sub.client_fingerprint = worker.fingerprint;

    if (!st.qualified_section_done) {
      st.qualified_section_done = true;
      ingest::QualificationRecord q;
      q.hearing_passed = chance(rng, a.qualification_pass);
      q.language_passed = q.hearing_passed || chance(rng, 0.5);
      q.device_type = a.kind == ArchetypeKind::no_headset ? "loudspeaker" : "headphones";
      sub.qualification = q;
      if (q.passed()) {
        st.qualification_token = encode_token(
            sign_certificate(CertificateKind::qualification, worker.id, start + 60, 0, client_key));
      } else {
        st.disabled = true;
      }
    }
    if (st.qualification_token) sub.certificates.push_back(*st.qualification_token);

    if (pair_count > 0) {
      const bool cert_valid = st.env_certificate && st.env_certificate->expires_at() > submit;
      if (!cert_valid) {
        st.env_certificate.reset();
        ingest::EnvironmentTest env;
        int correct = 0;
        for (int k = 0; k < pair_count; ++k) {
          const auto idx = static_cast<std::size_t>(k);
          const int key = idx < config.environment.pairs.size() ? config.environment.pairs[idx].better : 1;
          const int answer = chance(rng, a.env_accuracy) ? key : std::uniform_int_distribution<int>(1, 2)(rng);
          env.answers.push_back(answer);
          if (answer == key) ++correct;
        }
        env.passed = correct >= config.environment.min_correct;
        if (env.passed) {
          st.env_certificate = sign_certificate(CertificateKind::environment, worker.id, start + 120,
                                                config.environment.certificate_ttl_seconds, client_key);
        }
        sub.env_test = std::move(env);
      }
      if (st.env_certificate) sub.certificates.push_back(encode_token(*st.env_certificate));
    }

    const bool earpods_ok = chance(rng, a.earpods_accuracy);
    sub.earpods.answer = earpods_ok ? earpods_key : earpods_key + 1;
    sub.earpods.passed = earpods_ok;

    if (chance(rng, a.headset_probability)) {
      sub.detected_devices = {"USB Headset H390", "Default - Speakers"};
    } else {
      sub.detected_devices = {"Default - Speakers"};
    }

    // Deliberate answer to a clip of known score, or a guess for uniform raters.
    auto rate = [&](double score) {
      if (a.uniform_ratings) return uniform_answer(scale, rng);
      return draw_rating(score + options.run_bias, worker.bias, a.noise_sd, scale, rng);
    };

    for (std::size_t k = 0; k < session.rating_stimuli.size(); ++k) {
      const auto& s = session.rating_stimuli[k];
      Rating r;
      r.stimulus_id = s.id;
      r.worker_id = worker.id;
      r.session_id = session.session_id;
      r.timestamp = submit;
      r.condition = s.condition;
      const double score = latent.at(*s.condition);
      if (scale.method == Method::CCR) {
        const auto order = k < session.orders.size() ? session.orders[k] : PresentationOrder::reference_first;
        r.presentation_order = order;
        const int v = rate(score);
        r.value = order == PresentationOrder::reference_first ? v : -v;
      } else {
        r.value = rate(score);
      }
      sub.ratings.push_back(std::move(r));
      sub.clips.push_back({s.url, s.reference_url, true});
      st.rated.insert(s.id);
    }

    auto control = [&](const Stimulus& s, std::optional<PresentationOrder> order, int position) {
      ingest::ControlAnswer c;
      c.stimulus_id = s.id;
      c.url = s.url;
      c.reference_url = s.reference_url;
      c.order = order;
      c.expected = s.expected_answer.value_or(scale.min);
      c.position = position;
      c.played = true;
      return c;
    };
    sub.trapping = control(session.trapping, session.trapping_order, session.trapping_position);
    sub.trapping.answer = chance(rng, a.trapping_accuracy) ? sub.trapping.expected : uniform_answer(scale, rng);
    sub.gold = control(session.gold, session.gold_order, session.gold_position);
    sub.gold.tolerance = session.gold.tolerance.value_or(config.gold_tolerance);
    sub.gold.answer = rate(sub.gold.expected);

    if (!chance(rng, a.playback_completion)) {
      const std::size_t items = sub.clips.size() + 2;
      const auto miss = std::uniform_int_distribution<std::size_t>(0, items - 1)(rng);
      if (miss < sub.clips.size()) {
        sub.clips[miss].played = false;
      } else if (miss == sub.clips.size()) {
        sub.trapping.played = false;
      } else {
        sub.gold.played = false;
      }
    }
    out.submissions.push_back(std::move(sub));
  }
  return out;
}

std::string answer_csv(const SimulatedRun& run, const ExperimentConfig& config) {
  return ingest::write_answer_batch(run.submissions, config.method,
                                    config.environment.enabled ? config.environment.pair_count : 0);
}

}  // namespace p808::sim
