#include "gtx/util.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace gtx {

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  if (threads <= 1 || count == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, count);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

int default_threads() {
  if (const char* env = std::getenv("GTX_THREADS")) {
    const int t = std::atoi(env);
    if (t >= 1) return t;
  }
  return 1;
}

uint64_t fnv1a(const void* data, size_t len, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t fnv1a_str(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << content;
}

// ---- config -------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  const auto b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

}  // namespace

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

std::string Config::require(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw std::runtime_error("config: missing required key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw std::runtime_error("config: key '" + key + "' is not a number: " + it->second);
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (...) {
    throw std::runtime_error("config: key '" + key + "' is not an integer: " + it->second);
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config: key '" + key + "' is not a boolean: " + v);
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      const std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string t = trim(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

}  // namespace

std::vector<double> Config::get_doubles(const std::string& key,
                                        const std::vector<double>& fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  std::vector<double> out;
  for (const auto& tok : split_list(it->second)) out.push_back(std::stod(tok));
  return out;
}

std::vector<int> Config::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  std::vector<int> out;
  for (const auto& tok : split_list(it->second)) out.push_back(std::stoi(tok));
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key,
                                             const std::vector<std::string>& fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  return split_list(it->second);
}

std::string Config::echo() const {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, value] : values) {
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    if (sec != section) {
      os << "[" << sec << "]\n";
      section = sec;
    }
    os << (dot == std::string::npos ? key : key.substr(dot + 1)) << " = " << value << "\n";
  }
  return os.str();
}

Config parse_config(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values.count(full))
      throw std::runtime_error("config line " + std::to_string(lineno) + ": duplicate key '" + full +
                               "'");
    cfg.values[full] = value;
  }
  return cfg;
}

Config load_config(const std::string& path) { return parse_config(read_text_file(path)); }

void validate_config(const Config& cfg, const std::vector<SchemaField>& schema) {
  for (const auto& [key, value] : cfg.values) {
    bool known = false;
    for (const auto& f : schema) {
      if (f.key == key) {
        known = true;
        break;
      }
    }
    if (!known) throw std::runtime_error("config: unknown key '" + key + "'");
  }
}

// ---- csv ----------------------------------------------------------------------

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), ncols_(header.size()) {
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += header[i];
  }
  buffer_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != ncols_)
    throw std::invalid_argument("CsvWriter: row has " + std::to_string(cells.size()) +
                                " cells, header has " + std::to_string(ncols_));
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += cells[i];
  }
  buffer_ += '\n';
}

void CsvWriter::close() {
  write_text_file(path_, buffer_);
}

std::string CsvWriter::num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

int CsvTable::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const std::string& path) {
  CsvTable table;
  std::istringstream is(read_text_file(path));
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    cells.push_back(cur);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

uint64_t manifest_hash_file(const std::string& path) {
  const std::string content = read_text_file(path);
  const bool is_csv = path.size() > 4 && path.substr(path.size() - 4) == ".csv";
  const bool is_log = path.size() > 4 && path.substr(path.size() - 4) == ".log";
  if (!is_csv && !is_log) return fnv1a_str(content);

  // mask volatile timing fields line by line
  std::istringstream is(content);
  std::string line;
  std::string canonical;
  int wallclock_col = -1;
  bool first = true;
  while (std::getline(is, line)) {
    if (is_csv) {
      std::vector<std::string> cells;
      std::string cur;
      for (char c : line) {
        if (c == ',') {
          cells.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      cells.push_back(cur);
      if (first) {
        for (size_t i = 0; i < cells.size(); ++i)
          if (cells[i] == "wallclock_s") wallclock_col = static_cast<int>(i);
        first = false;
      } else if (wallclock_col >= 0 && wallclock_col < static_cast<int>(cells.size())) {
        cells[wallclock_col] = "0";
      }
      for (size_t i = 0; i < cells.size(); ++i) {
        if (i) canonical += ',';
        canonical += cells[i];
      }
      canonical += '\n';
    } else {
      const auto pos = line.find("wallclock=");
      if (pos != std::string::npos) {
        auto end = line.find(' ', pos);
        if (end == std::string::npos) end = line.size();
        line = line.substr(0, pos) + "wallclock=0" + line.substr(end);
      }
      canonical += line;
      canonical += '\n';
    }
  }
  return fnv1a_str(canonical);
}

}  // namespace gtx
