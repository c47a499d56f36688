#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ger {

using Token = std::string;
using Tokens = std::vector<Token>;

// Text normalization applied before scoring. Steps run in a fixed order:
// NFC, lowercase, punctuation strip, whitespace split.
struct NormConfig {
  bool unicode_nfc = true;
  bool lowercase = false;
  bool collapse_whitespace = true;
  // UTF-8 string whose code points are removed before splitting. Empty keeps
  // all punctuation (apostrophes in "sa'n" survive by default).
  std::string strip_punct;

  friend bool operator==(const NormConfig&, const NormConfig&) = default;
};

Tokens tokenize(std::string_view text, const NormConfig& cfg = {});

// Joins tokens with single spaces.
std::string join(const Tokens& tokens);

// Short human-readable form, recorded in report metadata.
std::string describe(const NormConfig& cfg);

}  // namespace ger
