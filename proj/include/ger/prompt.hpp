#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ger/data_model.hpp"

namespace ger {

struct FewShotExample {
  std::vector<std::string> nbest;
  std::string reference;

  friend bool operator==(const FewShotExample&, const FewShotExample&) = default;
};

void to_json(nlohmann::json& j, const FewShotExample& e);
void from_json(const nlohmann::json& j, FewShotExample& e);
std::vector<FewShotExample> load_examples(const std::filesystem::path& path);

// A named, versioned prompt layout. `body` may reference {role_instruction},
// {examples_block}, {nbest_block} and {output_instruction}; every placeholder
// must be bound when rendering.
struct PromptTemplate {
  std::string name;
  std::string version;
  std::string body;

  std::string id() const { return name + "/" + version; }
};

const PromptTemplate& default_template();
const PromptTemplate& find_template(const std::string& id);  // throws ConfigError

struct PromptConfig {
  CorrectionMode mode = CorrectionMode::generation;
  int shots = 0;
  std::string template_id = "ger-default/1";
  std::string language_name = "Frisian";
};

std::string build_prompt(const NBestList& nbest, const PromptConfig& cfg,
                         std::span<const FewShotExample> examples);

// Replaces {name} placeholders. Throws ConfigError on an unbound or unknown one.
std::string render_template(const std::string& body,
                            std::span<const std::pair<std::string, std::string>> bindings);

std::pair<std::string, ParseStatus> parse_generation(const std::string& raw,
                                                     const NBestList& nbest);
std::pair<int, ParseStatus> parse_selection(const std::string& raw, std::size_t n);

}  // namespace ger
