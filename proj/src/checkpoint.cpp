#include "csipred/checkpoint.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "csipred/errors.hpp"

namespace csipred {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) {
    throw DataError("cannot format double");
  }
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw DataError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

void CheckpointSection::set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of(" \t\n") != std::string::npos ||
      value.find('\n') != std::string::npos) {
    throw ContractError("invalid checkpoint attribute '" + key + "'");
  }
  for (auto& [k, v] : attrs_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  attrs_.emplace_back(key, value);
}

void CheckpointSection::set(const std::string& key, double value) {
  set(key, format_double(value));
}

void CheckpointSection::set(const std::string& key, long long value) {
  set(key, std::to_string(value));
}

bool CheckpointSection::has(const std::string& key) const {
  for (const auto& kv : attrs_) {
    if (kv.first == key) {
      return true;
    }
  }
  return false;
}

const std::string& CheckpointSection::get(const std::string& key) const {
  for (const auto& kv : attrs_) {
    if (kv.first == key) {
      return kv.second;
    }
  }
  throw DataError("checkpoint section '" + kind_ + "' lacks attribute '" + key + "'");
}

double CheckpointSection::get_double(const std::string& key) const {
  return parse_double(get(key));
}

long long CheckpointSection::get_int(const std::string& key) const {
  const std::string& s = get(key);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("attribute '" + key + "' is not an integer: '" + s + "'");
  }
  return v;
}

void CheckpointSection::add_tensor(std::string name, DenseMatrix value) {
  tensors_.emplace_back(std::move(name), std::move(value));
}

const DenseMatrix& CheckpointSection::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors_) {
    if (n == name) {
      return m;
    }
  }
  throw DataError("checkpoint section '" + kind_ + "' lacks tensor '" + name + "'");
}

bool CheckpointSection::has_tensor(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.first == name) {
      return true;
    }
  }
  return false;
}

void CheckpointSection::add_params(const ParamStore& store) {
  for (std::size_t i = 0; i < store.slots().size(); ++i) {
    add_tensor(store.slots()[i].name, DenseMatrix(store.tensor(i)));
  }
}

void CheckpointSection::read_params(ParamStore& store) const {
  for (std::size_t i = 0; i < store.slots().size(); ++i) {
    const auto& slot = store.slots()[i];
    const DenseMatrix& m = tensor(slot.name);
    if (static_cast<std::size_t>(m.rows()) != slot.rows ||
        static_cast<std::size_t>(m.cols()) != slot.cols) {
      throw DataError("tensor '" + slot.name + "' has shape " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", expected " + std::to_string(slot.rows) +
                      "x" + std::to_string(slot.cols));
    }
    store.tensor(i) = m;
  }
}

CheckpointSection& Checkpoint::add(std::string kind) {
  sections.emplace_back(std::move(kind));
  return sections.back();
}

std::vector<const CheckpointSection*> Checkpoint::find_all(const std::string& kind) const {
  std::vector<const CheckpointSection*> out;
  for (const auto& s : sections) {
    if (s.kind() == kind) {
      out.push_back(&s);
    }
  }
  return out;
}

const CheckpointSection& Checkpoint::find(const std::string& kind) const {
  auto all = find_all(kind);
  if (all.empty()) {
    throw DataError("checkpoint has no '" + kind + "' section");
  }
  return *all.front();
}

std::string Checkpoint::serialize() const {
  std::string out = "csipred-checkpoint " + std::to_string(kCheckpointVersion) + "\n";
  for (const auto& s : sections) {
    out += "section " + s.kind() + "\n";
    for (const auto& [k, v] : s.attrs()) {
      out += "attr " + k + " " + v + "\n";
    }
    for (const auto& [name, m] : s.tensors()) {
      out += "tensor " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) +
             "\n";
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          if (c > 0) {
            out += ' ';
          }
          out += format_double(m(r, c));
        }
        out += '\n';
      }
    }
    out += "end\n";
  }
  return out;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') {
      ++i;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') {
      ++j;
    }
    if (j > i) {
      parts.push_back(line.substr(i, j - i));
    }
    i = j;
  }
  return parts;
}

std::size_t parse_count(std::string_view s, std::size_t line_no) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("bad tensor dimension '" + std::string(s) + "'", line_no);
  }
  return v;
}

}  // namespace

Checkpoint Checkpoint::parse(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty() || lines[0] != "csipred-checkpoint " + std::to_string(kCheckpointVersion)) {
    throw ParseError("not a version " + std::to_string(kCheckpointVersion) + " checkpoint", 1);
  }
  Checkpoint cp;
  CheckpointSection* current = nullptr;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string_view line = lines[i];
    if (line.empty()) {
      continue;
    }
    if (line.starts_with("section ")) {
      if (current != nullptr) {
        throw ParseError("section opened before previous 'end'", line_no);
      }
      current = &cp.add(std::string(line.substr(8)));
    } else if (line == "end") {
      if (current == nullptr) {
        throw ParseError("'end' outside a section", line_no);
      }
      current = nullptr;
    } else if (current == nullptr) {
      throw ParseError("content outside a section", line_no);
    } else if (line.starts_with("attr ")) {
      const auto rest = line.substr(5);
      const auto sp = rest.find(' ');
      if (sp == std::string_view::npos) {
        current->set(std::string(rest), std::string());
      } else {
        current->set(std::string(rest.substr(0, sp)), std::string(rest.substr(sp + 1)));
      }
    } else if (line.starts_with("tensor ")) {
      const auto head = split_ws(line);
      if (head.size() != 4) {
        throw ParseError("malformed tensor header", line_no);
      }
      const std::size_t rows = parse_count(head[2], line_no);
      const std::size_t cols = parse_count(head[3], line_no);
      DenseMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (std::size_t r = 0; r < rows; ++r) {
        ++i;
        if (i >= lines.size()) {
          throw ParseError("truncated tensor '" + std::string(head[1]) + "'", line_no);
        }
        const auto vals = split_ws(lines[i]);
        if (vals.size() != cols) {
          throw ParseError("tensor row has " + std::to_string(vals.size()) + " values, expected " +
                               std::to_string(cols),
                           i + 1);
        }
        for (std::size_t c = 0; c < cols; ++c) {
          try {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_double(vals[c]);
          } catch (const DataError& e) {
            throw ParseError(e.what(), i + 1);
          }
        }
      }
      current->add_tensor(std::string(head[1]), std::move(m));
    } else {
      throw ParseError("unrecognized line", line_no);
    }
  }
  if (current != nullptr) {
    throw ParseError("missing final 'end'", lines.size());
  }
  return cp;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw DataError("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return os.str();
}

std::string file_digest(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot open '" + path.string() + "' for writing");
  }
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) {
    throw DataError("write to '" + path.string() + "' failed");
  }
}

}  // namespace csipred
