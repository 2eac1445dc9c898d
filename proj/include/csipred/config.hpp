#pragma once

// Flat `key = value` experiment configuration shared by every command.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "csipred/datapipe.hpp"
#include "csipred/nprophet.hpp"
#include "csipred/recurrent.hpp"
#include "csipred/synthchan.hpp"

namespace csipred {

enum class ModelKind { np, rnn, bilstm, hybrid };
std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& text);

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Every accepted key with its default, in echo order.
const std::vector<ConfigKey>& config_schema();

class ExperimentConfig {
 public:
  ExperimentConfig();  // all defaults

  // Parses `key = value` lines ('#' comments). Unknown keys and malformed
  // values raise ConfigError with the line number.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);  // validates the value
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // Cross-key checks: builds every typed config and validates it.
  void validate() const;

  // Resolved config, one key per line in schema order; parse() round-trips it.
  std::string to_text() const;
  std::string digest() const;

  std::uint64_t seed() const { return static_cast<std::uint64_t>(get_int("seed")); }
  std::vector<std::uint64_t> compare_seeds() const;
  ModelKind model() const { return parse_model_kind(get("model")); }

  FadingConfig fading() const;
  SplitFractions fractions() const;
  RecurrentConfig recurrent(Architecture arch) const;
  NpConfig np(bool with_regressor = false) const;

  bool operator==(const ExperimentConfig&) const = default;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<Seasonality> parse_seasonalities(const std::string& text);
std::string format_seasonalities(const std::vector<Seasonality>& terms);

}  // namespace csipred
