#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "bfo/harness.hpp"
#include "bfo/models.hpp"
#include "json.hpp"

namespace bfo::cli {

using nlohmann::json;

/// Invalid configuration; the message starts with the offending dotted path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::invalid_argument(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Complete default document for `eq`. Every accepted key appears here.
json default_config(observers::Equation eq);

/// Applies "dotted.path=value"; value is parsed as JSON when possible and
/// taken as a string otherwise.
void apply_override(json& doc, std::string_view assignment);

struct RunConfig {
  json resolved;  ///< defaults merged with the user document
  models::ProblemInstance instance;
  models::NoiseSpec noise;
  int refine = 2;
  double theta = 1.0;
  bool auto_terms = true;
  int fixed_terms = 0;
  double eta_tol = 1e-10;
  int eta_max_iter = 2000;
  std::uint64_t seed = 20240917;
  std::string eta_cache;
  std::optional<double> reconstruct_max_error;
  harness::SweepPlan plan;

  std::string out_dir;
  std::string trace_path;
  std::string estimate_path;
  std::string diagnostics_path;
  std::string csv_path;
  std::string summary_path;
};

/// Merges `user` over the defaults for its equation, rejecting unknown keys
/// and type mismatches, and validates the result.
RunConfig resolve_config(const json& user);

/// Reads a JSON document; an empty path yields an empty object.
json load_config_file(const std::string& path);

}  // namespace bfo::cli
