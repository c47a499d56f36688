#pragma once
// Small helpers shared by the test binaries.
#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "ger/ctc.hpp"
#include "ger/text.hpp"

namespace ger::test {

inline const std::filesystem::path kFixture = GER_FIXTURE_DIR;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> n{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ger-test-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline Tokens random_tokens(std::mt19937& rng, std::size_t max_len, int alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> sym(0, alphabet - 1);
  Tokens t(len(rng));
  for (auto& s : t) s = std::string(1, static_cast<char>('a' + sym(rng)));
  return t;
}

// Random normalized T x V matrix; class 0 is blank.
inline LogitMatrix random_logits(std::mt19937& rng, std::size_t T, std::size_t V) {
  LogitMatrix m;
  m.utt_id = "rand";
  m.frames = T;
  m.vocab = V;
  m.blank_index = 0;
  std::normal_distribution<double> g(0.0, 1.5);
  m.values.resize(T * V);
  for (auto& x : m.values) x = g(rng);
  validate_and_normalize(m, true);
  return m;
}

// Blank, delimiter, then letters a, b, ...
inline Vocab small_vocab(std::size_t V) {
  std::vector<std::string> toks{"_", "|"};
  for (std::size_t i = 2; i < V; ++i) toks.push_back(std::string(1, static_cast<char>('a' + i - 2)));
  toks.resize(V);
  return make_vocab(toks, V > 1 ? "|" : "_", 0);
}

}  // namespace ger::test
