#include "gtx/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace gtx {

std::vector<int> RngStream::sample_without_replacement(int n, int k) {
  if (k > n || k < 0) throw std::invalid_argument("sample_without_replacement: k out of range");
  // partial Fisher-Yates over an index array
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + below_int(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

uint64_t substream_seed(uint64_t root, std::string_view name, uint64_t a, uint64_t b) {
  // FNV-1a over the name, then splitmix64 mixing of (root, a, b)
  uint64_t h = 1469598103934665603ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  auto mix = [](uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  h = mix(h ^ mix(root));
  h = mix(h ^ mix(a));
  h = mix(h ^ mix(b));
  return h;
}

}  // namespace gtx
