#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "natver/backend.hpp"

namespace natver {

// Deterministic offline backend. Prompts are matched by fingerprint (stable
// hash of the whitespace-normalized prompt) against a scenario that holds a
// canned completion and/or a Yes probability per prompt, plus a default.
//
// Tokens are whitespace-delimited; each token carries its preceding
// whitespace, so detokenize(tokenize(t)) == t byte-for-byte.
//
// Constrained generation replays the canned completion under the caller's
// masks: the next scripted word is emitted when the mask permits it, a
// newline in the script emits the newline token, words rejected by a block
// mask are skipped, and when the script cannot satisfy an allow-only mask
// the first allowed token is emitted instead. Identical scenarios yield
// bit-identical outputs.
class ScriptedBackend final : public Backend {
  public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(const std::filesystem::path& scenario_path);

    void save(const std::filesystem::path& path) const;

    static std::string fingerprint(std::string_view prompt);

    void add_response(std::string_view prompt, std::string text);
    void add_yes_no(std::string_view prompt, double p_yes);
    void set_default_response(std::string text);
    void set_default_yes_no(double p_yes);

    std::size_t vocab_size() override;
    std::vector<TokenId> tokenize(std::string_view text) override;
    std::string detokenize(std::span<const TokenId> tokens) override;
    std::string token_text(TokenId id) override;

    std::vector<TokenId> generate_constrained(const std::string& prompt,
                                              const StepMaskFn& step_mask,
                                              const GenerationParams& params) override;
    FreeGeneration generate_free(const std::string& prompt, const GenerationParams& params) override;
    YesNoScore score_yes_no(const std::string& prompt, const GenerationParams& params) override;

    // Trimmed surface of a token; empty for whitespace-only tokens.
    std::string token_word(TokenId id);

  private:
    struct Entry {
        std::string text;
        double p_yes = 0.5;
        bool has_text = false;
        bool has_p_yes = false;
    };

    TokenId intern(const std::string& surface);
    TokenId newline_token();
    const Entry* find(const std::string& prompt) const;

    std::unordered_map<std::string, Entry> entries_;
    std::string default_text_;
    double default_p_yes_ = 0.5;

    mutable std::mutex mu_;
    std::unordered_map<std::string, TokenId> ids_;
    std::vector<std::string> surfaces_;
};

}  // namespace natver
