#include "ger/correction.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "ger/digest.hpp"
#include "ger/error.hpp"

namespace ger {

namespace {

CorrectionRecord fallback_record(const NBestList& nbest, CorrectionRecord rec, std::string error) {
  rec.corrected_text = nbest.top().text;
  rec.parse_status = ParseStatus::fallback;
  if (rec.mode == CorrectionMode::selection) rec.selected_index = 1;
  rec.error = std::move(error);
  return rec;
}

void apply_response(const NBestList& nbest, CorrectionRecord& rec) {
  if (rec.mode == CorrectionMode::selection) {
    auto [index, status] = parse_selection(rec.raw_response, nbest.size());
    rec.selected_index = index;
    rec.parse_status = status;
    rec.corrected_text = nbest.hypotheses[static_cast<std::size_t>(index - 1)].text;
  } else {
    auto [text, status] = parse_generation(rec.raw_response, nbest);
    rec.corrected_text = std::move(text);
    rec.parse_status = status;
  }
}

}  // namespace

std::vector<CorrectionRecord> correct_batch(std::span<const NBestList> nbests,
                                            const PromptConfig& pcfg, const BackendConfig& bcfg,
                                            std::span<const FewShotExample> examples,
                                            const CorrectionOptions& opts) {
  validate(bcfg);
  if (pcfg.shots < 0 || examples.size() < static_cast<std::size_t>(pcfg.shots))
    throw ConfigError(std::to_string(pcfg.shots) + "-shot prompting needs " +
                      std::to_string(pcfg.shots) + " examples, only " +
                      std::to_string(examples.size()) + " supplied");
  for (const auto& nb : nbests)
    if (nb.hypotheses.empty()) throw DataError("'" + nb.utt_id + "' has an empty N-best list");

  std::vector<CorrectionRecord> records(nbests.size());
  for (std::size_t i = 0; i < nbests.size(); ++i) {
    records[i].utt_id = nbests[i].utt_id;
    records[i].mode = pcfg.mode;
    records[i].shots = pcfg.shots;
  }

  if (bcfg.kind == BackendKind::identity && opts.backend == nullptr) {
    for (std::size_t i = 0; i < nbests.size(); ++i) {
      auto& rec = records[i];
      rec.corrected_text = nbests[i].top().text;
      if (rec.mode == CorrectionMode::selection) rec.selected_index = 1;
    }
    return records;
  }

  // Prompts are rendered up front so template errors surface before any request.
  std::vector<std::string> prompts;
  prompts.reserve(nbests.size());
  for (const auto& nb : nbests) prompts.push_back(build_prompt(nb, pcfg, examples));

  std::unique_ptr<Backend> owned;
  Backend* backend = opts.backend;
  if (!backend) {
    owned = make_backend(bcfg);
    backend = owned.get();
  }
  if (bcfg.kind == BackendKind::mock_oracle && !opts.references && !opts.backend)
    throw ConfigError("mock_oracle backend needs reference transcripts");

  auto sleep = opts.sleep;
  if (!sleep) sleep = [](std::chrono::steady_clock::duration d) { std::this_thread::sleep_for(d); };
  ResponseCache cache(bcfg.cache_dir);
  // Mock backends share a model name; keep their answers apart.
  const std::string cache_model = bcfg.kind == BackendKind::http_chat
                                      ? bcfg.model_name
                                      : to_string(bcfg.kind) + "/" + bcfg.model_name;
  RateLimiter limiter(bcfg.requests_per_minute, sleep);

  std::atomic<std::size_t> next{0}, hits{0}, calls{0}, failed{0};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto one = [&](std::size_t i) {
    const NBestList& nb = nbests[i];
    CorrectionRecord& rec = records[i];
    const std::string& prompt = prompts[i];
    rec.prompt_hash = sha256_hex(prompt);

    const std::string* reference = nullptr;
    if (opts.references) {
      auto it = opts.references->find(nb.utt_id);
      if (it != opts.references->end()) reference = &it->second;
    }

    const std::string key = ResponseCache::key(cache_model, bcfg.temperature, prompt);
    std::optional<std::string> response = cache.get(key);
    if (response) {
      ++hits;
    } else if (bcfg.offline) {
      rec = fallback_record(nb, rec, "offline: no cached response");
      ++failed;
      return;
    } else {
      std::string last_error;
      auto backoff = bcfg.initial_backoff;
      for (int attempt = 0; attempt <= bcfg.max_retries; ++attempt) {
        limiter.acquire();
        ++calls;
        try {
          response = backend->complete({prompt, pcfg.mode, &nb, reference});
          break;
        } catch (const BackendError& e) {
          last_error = e.what();
          if (!e.transient() || attempt == bcfg.max_retries) break;
          sleep(backoff);
          backoff *= 2;
        }
      }
      if (!response) {
        rec = fallback_record(nb, rec, last_error);
        ++failed;
        return;
      }
      cache.put(key, cache_model, bcfg.temperature, *response);
    }
    rec.raw_response = *response;
    apply_response(nb, rec);
  };

  auto work = [&] {
    for (std::size_t i = next++; i < nbests.size(); i = next++) {
      try {
        one(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        next = nbests.size();  // stop handing out work
      }
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(bcfg.max_in_flight), nbests.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  }

  if (first_error) std::rethrow_exception(first_error);
  if (opts.stats) *opts.stats = {hits.load(), calls.load(), failed.load()};
  return records;
}

}  // namespace ger
