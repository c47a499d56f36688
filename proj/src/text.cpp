#include "ger/text.hpp"

#include <set>
#include <stdexcept>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace ger {

namespace {

icu::UnicodeString to_nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString out = nfc->normalize(s, status);
  if (U_FAILURE(status)) throw std::runtime_error("NFC normalization failed");
  return out;
}

std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

}  // namespace

Tokens tokenize(std::string_view text, const NormConfig& cfg) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (cfg.unicode_nfc) s = to_nfc(s);
  if (cfg.lowercase) s.toLower(icu::Locale::getRoot());

  std::set<UChar32> strip;
  if (!cfg.strip_punct.empty()) {
    icu::UnicodeString p = icu::UnicodeString::fromUTF8(cfg.strip_punct);
    for (int32_t i = 0; i < p.length(); i = p.moveIndex32(i, 1)) strip.insert(p.char32At(i));
  }

  Tokens tokens;
  icu::UnicodeString current;
  bool pending_empty = false;  // collapse off: separator seen, field not yet emitted
  for (int32_t i = 0; i < s.length(); i = s.moveIndex32(i, 1)) {
    UChar32 c = s.char32At(i);
    if (strip.count(c)) continue;
    if (u_isUWhiteSpace(c)) {
      if (cfg.collapse_whitespace) {
        if (!current.isEmpty()) tokens.push_back(to_utf8(current));
      } else {
        tokens.push_back(to_utf8(current));
        pending_empty = true;
      }
      current.remove();
      continue;
    }
    current.append(c);
    pending_empty = false;
  }
  if (!current.isEmpty() || pending_empty) tokens.push_back(to_utf8(current));
  return tokens;
}

std::string join(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string describe(const NormConfig& cfg) {
  std::string out = cfg.unicode_nfc ? "nfc" : "raw";
  if (cfg.lowercase) out += "+lower";
  if (!cfg.strip_punct.empty()) out += "+strip[" + cfg.strip_punct + "]";
  out += cfg.collapse_whitespace ? "+collapse-ws" : "+split-ws";
  return out;
}

}  // namespace ger
