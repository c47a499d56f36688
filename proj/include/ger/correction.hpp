#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ger/backend.hpp"
#include "ger/prompt.hpp"

namespace ger {

struct CorrectionStats {
  std::size_t cache_hits = 0;
  std::size_t backend_calls = 0;  // attempts, including retries
  std::size_t failed = 0;
};

struct CorrectionOptions {
  // Reference transcripts by utterance id; only mock_oracle needs them.
  const std::map<std::string, std::string>* references = nullptr;
  // Replaces the backend built from BackendConfig (tests, custom gateways).
  Backend* backend = nullptr;
  // Sleep used for retry backoff and rate limiting.
  std::function<void(std::chrono::steady_clock::duration)> sleep;
  CorrectionStats* stats = nullptr;
};

// Runs one prompt per N-best list through the backend. Responses are cached by
// digest of (model, temperature, prompt), where mock backends use
// "<kind>/<model>" as the model; transient failures are retried with
// exponential backoff. A list whose retries are exhausted yields a record with
// `error` set that falls back to the rank-1 hypothesis. Output order matches
// input order.
std::vector<CorrectionRecord> correct_batch(std::span<const NBestList> nbests,
                                            const PromptConfig& pcfg, const BackendConfig& bcfg,
                                            std::span<const FewShotExample> examples,
                                            const CorrectionOptions& opts = {});

}  // namespace ger
