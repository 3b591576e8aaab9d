#include "p808/hit_app.hpp"

#include "p808/certificate.hpp"
#include "p808/error.hpp"

namespace p808::builder {

namespace {

using nlohmann::json;

constexpr const char* kTemplateName = "hit_app.html";

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// JSON safe for embedding in a <script> element.
std::string script_json(const json& j) {
  auto text = j.dump(2);
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '<' && i + 1 < text.size() && text[i + 1] == '/') {
      out += "<\\/";
      ++i;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::string scale_markup(const RatingScale& scale) {
  std::string out = "<template id=\"p808-rating-scale\">\n";
  for (int v = scale.max; v >= scale.min; --v) {
    out += "  <label class=\"p808-level\"><input type=\"radio\" name=\"rating\" value=\"" +
           std::to_string(v) + "\"> " + html_escape(scale.label(v)) + "</label>\n";
  }
  out += "</template>";
  return out;
}

std::string env_markup(const ExperimentConfig& config) {
  if (!config.environment.enabled) return "<!-- environment test disabled -->";
  std::string out = "<ol id=\"p808-env-pairs\">\n";
  for (std::size_t i = 0; i < config.environment.pairs.size(); ++i) {
    const auto& p = config.environment.pairs[i];
    out += "  <li data-pair=\"" + std::to_string(i + 1) + "\" data-first=\"" +
           html_escape(p.first_url) + "\" data-second=\"" + html_escape(p.second_url) +
           "\">Pair " + std::to_string(i + 1) + "</li>\n";
  }
  out += "</ol>";
  return out;
}

}  // namespace

json client_config(const ExperimentConfig& config, const std::string& secret,
                   std::optional<Timestamp> build_time) {
  const auto scale = config.scale();
  json env_pairs = json::array();
  for (const auto& p : config.environment.pairs) {
    env_pairs.push_back({{"first_url", p.first_url}, {"second_url", p.second_url}, {"better", p.better}});
  }
  json j = {
      {"schema_version", config.schema_version},
      {"method", to_string(config.method)},
      {"scale", scale},
      {"sections",
       {{"qualification", config.filters.qualification},
        {"environment", config.environment.enabled},
        {"training", !config.training_clips.empty()},
        {"rating_block_size", config.rating_block_size},
        {"items_per_session", config.rating_block_size + 2}}},
      {"training", {{"set_id", config.training_set_id}, {"clips", config.training_clips}}},
      {"environment",
       {{"pair_count", config.environment.pair_count},
        {"min_correct", config.environment.min_correct},
        {"certificate_ttl_seconds", config.environment.certificate_ttl_seconds},
        {"pairs", env_pairs}}},
      {"headset_keywords", config.headset_keywords},
      {"certificate_key", derive_client_key(secret)},
      {"storage_keys",
       {{"qualification", kStoreQualification},
        {"environment", kStoreEnvironment},
        {"fingerprint", kStoreFingerprint}}},
  };
  if (config.earpods_answer) j["earpods_answer"] = *config.earpods_answer;
  if (config.embed_build_timestamp && build_time) j["build_time"] = *build_time;
  return j;
}

AppBundle render_hit_app(const ExperimentConfig& config, const std::string& secret,
                         const std::filesystem::path& template_dir,
                         const std::vector<std::string>& input_columns,
                         std::optional<Timestamp> build_time) {
  config.validate();
  const auto scale = config.scale();
  if (config.environment.enabled &&
      config.environment.pairs.size() != static_cast<std::size_t>(config.environment.pair_count)) {
    throw ConfigError("environment test enabled but " +
                      std::to_string(config.environment.pairs.size()) + " of " +
                      std::to_string(config.environment.pair_count) + " pairs configured");
  }
  const auto main_template = template_dir / kTemplateName;
  if (!std::filesystem::is_regular_file(main_template)) {
    throw ConfigError("missing HIT app template '" + main_template.string() + "'");
  }

  json session = json::object();
  for (const auto& c : input_columns) session[c] = "${" + c + "}";

  std::string html = read_file(main_template);
  replace_all(html, "{{TITLE}}",
              html_escape(std::string(to_string(config.method)) + " speech quality rating"));
  replace_all(html, "{{METHOD}}", std::string(to_string(config.method)));
  replace_all(html, "{{SCALE_TEMPLATE}}", scale_markup(scale));
  replace_all(html, "{{ENV_PAIRS}}", env_markup(config));
  replace_all(html, "{{CLIENT_CONFIG_JSON}}", script_json(client_config(config, secret, build_time)));
  replace_all(html, "{{SESSION_FIELDS_JSON}}", script_json(session));
  if (const auto pos = html.find("{{"); pos != std::string::npos) {
    throw ConfigError("unresolved template placeholder near '" + html.substr(pos, 32) + "'");
  }

  AppBundle bundle;
  bundle.files["index.html"] = std::move(html);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(template_dir)) {
    if (!entry.is_regular_file() || entry.path() == main_template) continue;
    const auto rel = std::filesystem::relative(entry.path(), template_dir).generic_string();
    bundle.files[rel] = read_file(entry.path());
  }
  return bundle;
}

void write_bundle(const AppBundle& bundle, const std::filesystem::path& dir) {
  for (const auto& [name, contents] : bundle.files) write_file(dir / name, contents);
}

}  // namespace p808::builder
