#pragma once

// Versioned text container used for every saved artifact (recurrent, NP and
// hybrid checkpoints, scalers). Layout, one item per line:
//
//   csipred-checkpoint 1
//   section <kind>
//   attr <key> <value>            value runs to end of line
//   tensor <name> <rows> <cols>
//   <row 0 values, space separated>
//   ...
//   end
//
// Doubles are written in shortest round-trip decimal form, so save -> load
// reproduces every parameter bit for bit.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "csipred/numcore.hpp"

namespace csipred {

inline constexpr int kCheckpointVersion = 1;

std::string format_double(double value);
double parse_double(std::string_view text);

class CheckpointSection {
 public:
  CheckpointSection() = default;
  explicit CheckpointSection(std::string kind) : kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;

  void add_tensor(std::string name, DenseMatrix value);
  const DenseMatrix& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;

  // Every slot of `store` becomes a tensor named by its slot name.
  void add_params(const ParamStore& store);
  // Copies tensors back into an already laid-out store; shapes must match.
  void read_params(ParamStore& store) const;

  const std::vector<std::pair<std::string, std::string>>& attrs() const { return attrs_; }
  const std::vector<std::pair<std::string, DenseMatrix>>& tensors() const { return tensors_; }

 private:
  std::string kind_;
  std::vector<std::pair<std::string, std::string>> attrs_;
  std::vector<std::pair<std::string, DenseMatrix>> tensors_;
};

class Checkpoint {
 public:
  std::vector<CheckpointSection> sections;

  CheckpointSection& add(std::string kind);
  std::vector<const CheckpointSection*> find_all(const std::string& kind) const;
  const CheckpointSection& find(const std::string& kind) const;

  std::string serialize() const;
  static Checkpoint parse(std::string_view text);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

std::string sha256_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace csipred
