#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gtx {

// Run fn(i) for i in [0, count) on up to `threads` workers. threads <= 1 runs
// inline. Exceptions from workers are rethrown (first one wins).
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

// GTX_THREADS env var, else 1.
int default_threads();

// FNV-1a 64-bit over bytes.
uint64_t fnv1a(const void* data, size_t len, uint64_t h = 1469598103934665603ull);
uint64_t fnv1a_str(const std::string& s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// ---- flat config ------------------------------------------------------------

// INI-style sections of key = value lines; '#' starts a comment. Keys are
// stored as "section.key".
struct Config {
  std::map<std::string, std::string> values;
  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       const std::vector<std::string>& fallback) const;
  std::string echo() const;  // canonical text form, sorted keys
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);

// One schema entry per known key; validation rejects unknown keys by name.
struct SchemaField {
  std::string key;  // "section.key"
  std::string type;
  std::string doc;
};

void validate_config(const Config& cfg, const std::vector<SchemaField>& schema);

// ---- csv ---------------------------------------------------------------------

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  void close();
  const std::string& path() const { return path_; }
  static std::string num(double v);

 private:
  std::string path_;
  std::string buffer_;
  size_t ncols_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int col(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// Hash of a file's canonicalized content: values in columns named
// "wallclock_s" (and `wallclock=` fields in run logs) are masked so timing
// noise does not break run-to-run MANIFEST equality.
uint64_t manifest_hash_file(const std::string& path);

}  // namespace gtx
