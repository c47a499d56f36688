#include "ger/prompt.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>

#include "ger/align.hpp"
#include "ger/error.hpp"

namespace ger {

void to_json(nlohmann::json& j, const FewShotExample& e) {
  j = nlohmann::json{{"nbest", e.nbest}, {"reference", e.reference}};
}

void from_json(const nlohmann::json& j, FewShotExample& e) {
  e.nbest.clear();
  for (const auto& h : j.at("nbest"))
    e.nbest.push_back(h.is_string() ? h.get<std::string>() : h.at("text").get<std::string>());
  e.reference = j.at("reference").get<std::string>();
  if (e.nbest.empty()) throw DataError("few-shot example without hypotheses");
}

std::vector<FewShotExample> load_examples(const std::filesystem::path& path) {
  return load_records<FewShotExample>(path);
}

namespace {

const std::array<PromptTemplate, 1> kTemplates{{
    {"ger-default", "1",
     "{role_instruction}\n"
     "\n"
     "{examples_block}"
     "{nbest_block}\n"
     "\n"
     "{output_instruction}\n"},
}};

void numbered(std::ostringstream& out, const std::vector<std::string>& hyps) {
  for (std::size_t i = 0; i < hyps.size(); ++i) out << (i + 1) << ". " << hyps[i] << '\n';
}

// 1-based index of the example hypothesis closest to its reference.
int closest(const FewShotExample& e) {
  const Tokens ref = tokenize(e.reference);
  int best = 1;
  std::size_t best_err = 0;
  for (std::size_t i = 0; i < e.nbest.size(); ++i) {
    const Tokens hyp = tokenize(e.nbest[i]);
    const std::size_t err = edit_distance(ref, hyp);
    if (i == 0 || err < best_err) {
      best = static_cast<int>(i) + 1;
      best_err = err;
    }
  }
  return best;
}

}  // namespace

const PromptTemplate& default_template() { return kTemplates.front(); }

const PromptTemplate& find_template(const std::string& id) {
  for (const auto& t : kTemplates)
    if (t.id() == id) return t;
  throw ConfigError("unknown prompt template '" + id + "'");
}

std::string render_template(const std::string& body,
                            std::span<const std::pair<std::string, std::string>> bindings) {
  std::string out;
  out.reserve(body.size() * 2);
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::size_t open = body.find('{', pos);
    if (open == std::string::npos) {
      out.append(body, pos);
      break;
    }
    const std::size_t close = body.find('}', open);
    if (close == std::string::npos) throw ConfigError("unterminated placeholder in template");
    out.append(body, pos, open - pos);
    const std::string name = body.substr(open + 1, close - open - 1);
    auto it = std::find_if(bindings.begin(), bindings.end(),
                           [&](const auto& b) { return b.first == name; });
    if (it == bindings.end()) throw ConfigError("unbound template placeholder {" + name + "}");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

std::string build_prompt(const NBestList& nbest, const PromptConfig& cfg,
                         std::span<const FewShotExample> examples) {
  if (cfg.shots < 0) throw ConfigError("shots must be >= 0");
  const auto k = static_cast<std::size_t>(cfg.shots);
  if (examples.size() < k)
    throw ConfigError(std::to_string(k) + "-shot prompting needs " + std::to_string(k) +
                      " examples, only " + std::to_string(examples.size()) + " available");
  if (nbest.hypotheses.empty()) throw DataError("cannot prompt with an empty N-best list");
  const std::string& lang = cfg.language_name;
  const bool select = cfg.mode == CorrectionMode::selection;

  std::ostringstream role;
  role << "You are a " << lang << " language expert. You are given the N-best hypotheses that an "
       << "automatic speech recognition system produced for one " << lang
       << " utterance, ordered from most to least likely.";

  std::ostringstream shots;
  if (k > 0) {
    shots << "Here " << (k == 1 ? "is 1 correction example" : "are " + std::to_string(k) +
                                                                   " correction examples")
          << ".\n\n";
    for (std::size_t i = 0; i < k; ++i) {
      shots << "Example " << (i + 1) << ":\n";
      numbered(shots, examples[i].nbest);
      if (select)
        shots << "Answer: " << closest(examples[i]) << "\n\n";
      else
        shots << "Answer: " << examples[i].reference << "\n\n";
    }
  }

  std::vector<std::string> texts;
  for (const auto& h : nbest.hypotheses) texts.push_back(h.text);
  std::ostringstream list;
  list << "Hypotheses:\n";
  numbered(list, texts);
  std::string nbest_block = list.str();
  nbest_block.pop_back();  // the template supplies the trailing newline

  const std::string n = std::to_string(texts.size());
  std::string output = select
      ? "Choose the best candidate from the " + n + "-best list and output only its index, a "
        "single integer from 1 to " + n + "."
      : "Correct the recognition errors and output only the corrected " + lang +
        " transcription, without any explanation.";

  const std::array<std::pair<std::string, std::string>, 4> bindings{{
      {"role_instruction", role.str()},
      {"examples_block", shots.str()},
      {"nbest_block", nbest_block},
      {"output_instruction", output},
  }};
  return render_template(find_template(cfg.template_id).body, bindings);
}

namespace {

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }
bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

// Removes one layer of enclosing double quotes or backticks.
std::string unquote(std::string s) {
  static const std::array<std::pair<std::string_view, std::string_view>, 3> pairs{{
      {"\"", "\""}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}, {"`", "`"}}};
  for (const auto& [open, close] : pairs) {
    if (s.size() >= open.size() + close.size() && starts_with(s, open) && ends_with(s, close))
      return trim(s.substr(open.size(), s.size() - open.size() - close.size()));
  }
  return s;
}

}  // namespace

std::pair<std::string, ParseStatus> parse_generation(const std::string& raw,
                                                     const NBestList& nbest) {
  std::istringstream in(raw);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (starts_with(t, "```")) continue;
    t = unquote(t);
    if (!t.empty()) return {t, ParseStatus::ok};
  }
  if (nbest.hypotheses.empty()) return {std::string{}, ParseStatus::fallback};
  return {nbest.top().text, ParseStatus::fallback};
}

std::pair<int, ParseStatus> parse_selection(const std::string& raw, std::size_t n) {
  const auto first = std::find_if(raw.begin(), raw.end(),
                                  [](unsigned char c) { return std::isdigit(c) != 0; });
  if (first != raw.end()) {
    const auto last = std::find_if(first, raw.end(),
                                   [](unsigned char c) { return std::isdigit(c) == 0; });
    unsigned long long v = 0;
    auto [ptr, ec] = std::from_chars(&*first, &*first + (last - first), v);
    (void)ptr;
    if (ec == std::errc{} && v >= 1 && v <= n) return {static_cast<int>(v), ParseStatus::ok};
  }
  return {1, ParseStatus::fallback};
}

}  // namespace ger
