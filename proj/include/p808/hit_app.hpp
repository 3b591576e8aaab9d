#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "p808/config.hpp"
#include "p808/types.hpp"

namespace p808::builder {

// Rendered HIT app: relative path -> file contents.
struct AppBundle {
  std::map<std::string, std::string> files;
};

// Keys under which the rating client persists state in the browser.
inline constexpr const char* kStoreQualification = "p808.qual";
inline constexpr const char* kStoreEnvironment = "p808.env";
inline constexpr const char* kStoreFingerprint = "p808.fingerprint";

// Settings the rating client reads at start-up. Holds the derived client
// signing key, never the experiment secret.
nlohmann::json client_config(const ExperimentConfig& config, const std::string& secret,
                             std::optional<Timestamp> build_time);

// Fills `hit_app.html` from `template_dir` and copies every other file of the
// directory verbatim. `input_columns` are the platform input columns exposed to
// the client as ${column} substitutions.
// Throws ConfigError when the template is missing or a placeholder stays unresolved.
AppBundle render_hit_app(const ExperimentConfig& config, const std::string& secret,
                         const std::filesystem::path& template_dir,
                         const std::vector<std::string>& input_columns,
                         std::optional<Timestamp> build_time = std::nullopt);

void write_bundle(const AppBundle& bundle, const std::filesystem::path& dir);

}  // namespace p808::builder
