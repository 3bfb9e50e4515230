#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "natver/backend.hpp"

namespace natver {

struct HttpBackendConfig {
    // Base URL including any path prefix, e.g. "http://localhost:8080/v1".
    std::string base_url;
    std::string model;
    // API key is read from this environment variable (OPENAI_API_KEY is
    // tried as a fallback); requests go out without auth when neither is set.
    std::string api_key_env = "NATVER_API_KEY";
    int max_retries = 3;
    int retry_base_ms = 100;
    int max_in_flight = 4;
    int timeout_s = 120;
    bool probe = true;
};

struct HttpCapabilities {
    bool tokenize = false;    // /tokenize + /detokenize routes answer
    bool logit_bias = true;   // assumed until a request proves otherwise
    bool logprobs = true;
};

// OpenAI-compatible completions client. Constrained generation issues one
// masked single-token request per step via logit_bias; Yes/No scoring reads
// the first generated token's top logprobs and renormalizes over the two
// answer families. When the server exposes no logprobs the score degrades
// to a sampled answer with probability 1 (flagged on the result).
class HttpBackend final : public Backend {
  public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    const HttpCapabilities& capabilities() const { return caps_; }

    std::size_t vocab_size() override;
    std::vector<TokenId> tokenize(std::string_view text) override;
    std::string detokenize(std::span<const TokenId> tokens) override;
    std::string token_text(TokenId id) override;

    std::vector<TokenId> generate_constrained(const std::string& prompt,
                                              const StepMaskFn& step_mask,
                                              const GenerationParams& params) override;
    FreeGeneration generate_free(const std::string& prompt, const GenerationParams& params) override;
    YesNoScore score_yes_no(const std::string& prompt, const GenerationParams& params) override;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    HttpCapabilities caps_;

    // Fallback whitespace vocabulary when the server has no tokenize route.
    TokenId intern(const std::string& surface);
    std::mutex vocab_mu_;
    std::unordered_map<std::string, TokenId> ids_;
    std::vector<std::string> surfaces_;
};

}  // namespace natver
