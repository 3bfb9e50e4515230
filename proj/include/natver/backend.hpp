#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace natver {

using TokenId = std::int64_t;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Transport failure after the configured number of attempts.
struct TransportError : std::runtime_error {
    int attempts = 0;
    TransportError(const std::string& what, int attempts_made)
        : std::runtime_error(what), attempts(attempts_made) {}
};

// The backend cannot honor a requested feature (token masks, logprobs, ...).
struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-step decoding constraint. AllowOnly restricts the next token to the
// listed ids (listed in preference order: the first entry is what a scripted
// replay falls back to). Block forbids the listed ids and admits everything
// else. Unconstrained admits everything.
struct ConstraintMask {
    enum class Kind { AllowOnly, Block, Unconstrained };

    Kind kind = Kind::Unconstrained;
    std::vector<TokenId> tokens;

    static ConstraintMask allow_only(std::vector<TokenId> allowed);
    static ConstraintMask block(std::vector<TokenId> blocked);
    static ConstraintMask none();

    bool permits(TokenId id) const;
};

// Invoked before every decoding step with the tokens emitted so far.
// Returning nullopt stops generation.
using StepMaskFn = std::function<std::optional<ConstraintMask>(std::span<const TokenId>)>;

struct YesNoScore {
    double p_yes = 0.0;
    double p_no = 1.0;
    bool favored_yes = false;  // ties favor No
    bool degraded = false;     // sampled answer, no log-likelihoods available

    // Renormalizes two non-negative masses over {Yes, No}.
    static YesNoScore from_raw(double yes_mass, double no_mass);
    // Degraded mode: the sampled option gets probability 1.
    static YesNoScore from_sampled(bool yes);
};

struct GenerationParams {
    double temperature = 0.1;
    double top_p = 0.9;
    int max_tokens = 256;
    std::string system_prompt = "You are a helpful assistant.";

    static GenerationParams qa_defaults();    // Yes/No scoring: temperature 1.0, top-p 0.9
    static GenerationParams task_defaults();  // everything else: temperature 0.1
};

struct FreeGeneration {
    std::string text;
    bool truncated = false;
};

// Uniform contract for language-model interactions. Implementations must be
// safe to share across concurrent pipeline workers.
class Backend {
  public:
    virtual ~Backend() = default;

    virtual std::size_t vocab_size() = 0;
    virtual std::vector<TokenId> tokenize(std::string_view text) = 0;
    virtual std::string detokenize(std::span<const TokenId> tokens) = 0;
    virtual std::string token_text(TokenId id);

    virtual std::vector<TokenId> generate_constrained(const std::string& prompt,
                                                      const StepMaskFn& step_mask,
                                                      const GenerationParams& params) = 0;
    virtual FreeGeneration generate_free(const std::string& prompt,
                                         const GenerationParams& params) = 0;
    virtual YesNoScore score_yes_no(const std::string& prompt, const GenerationParams& params) = 0;
};

}  // namespace natver
