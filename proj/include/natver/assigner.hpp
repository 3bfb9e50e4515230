#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "natver/aligner.hpp"
#include "natver/backend.hpp"
#include "natver/natlog.hpp"

namespace natver {

// Question templates per assignable operator, with X standing for the claim
// chunk and Y for the aligned evidence span. The suffix is appended to every
// instantiated prompt.
struct TemplateBank {
    std::map<NatOp, std::vector<std::string>> templates;
    std::string suffix = "Answer Yes or No.";

    // Loads <dir>/<natop_name>/<i>.txt for i = 0, 1, ... per operator.
    static TemplateBank load(const std::filesystem::path& dir);
    void validate() const;  // every assignable operator needs >= 1 template
    std::size_t min_size() const;
};

struct TemplateWeights {
    std::map<NatOp, std::vector<double>> weights;

    static TemplateWeights uniform(const TemplateBank& bank);
    static TemplateWeights load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    void validate(const TemplateBank& bank) const;  // aligned, non-negative, sums to 1
};

struct CandidateList {
    std::vector<NatOp> ops;
};

// Signal-gated candidates: Support -> [≡, ⊑]; Refute -> [¬, ⊒, alternation];
// no signal -> all five assignable operators.
CandidateList candidate_list(std::optional<Signal> signal);

// Resolution order when several candidates clear the threshold.
inline constexpr std::array<NatOp, 5> kPriorityOrder = {
    NatOp::Equivalence, NatOp::Negation, NatOp::ForwardEntailment,
    NatOp::ReverseEntailment, NatOp::Alternation,
};

std::string instantiate_template(std::string_view question_template, std::string_view chunk,
                                 std::string_view evidence_span, std::string_view suffix);

// Weighted average of per-template Yes probabilities. Templates that fail at
// the backend are excluded and the surviving weights renormalized; the
// failure is reported through `degraded` when provided.
double score_natop(const AlignmentPair& pair, NatOp op, const TemplateBank& bank,
                   const TemplateWeights& weights, Backend& backend,
                   const GenerationParams& params = GenerationParams::qa_defaults(),
                   bool* degraded = nullptr);

struct NatOpScores {
    std::map<NatOp, double> s;
    std::vector<NatOp> passed;  // scores strictly above alpha, candidate order
    NatOp chosen = NatOp::Independence;
};

// Scores the candidates for the pair, applies the strict threshold, picks the
// first passing operator in priority order, and falls back to Independence.
// Pairs with an empty alignment are assigned Independence without scoring.
NatOpScores assign_natop(const AlignmentPair& pair, const TemplateBank& bank,
                         const TemplateWeights& weights, Backend& backend, double alpha,
                         const GenerationParams& params = GenerationParams::qa_defaults(),
                         bool ignore_signal = false);

std::vector<ProofTriple> assign_all(std::span<const AlignmentPair> pairs, const TemplateBank& bank,
                                    const TemplateWeights& weights, Backend& backend, double alpha,
                                    const GenerationParams& params = GenerationParams::qa_defaults(),
                                    bool ignore_signal = false);

// Turns per-template confidences into weights (w_i = c_i / sum c_j per
// operator); operators with no mass fall back to uniform.
TemplateWeights normalize_confidences(const TemplateBank& bank,
                                      const std::map<NatOp, std::vector<double>>& confidence);

// One pass over alignment pairs capturing mean max(pYes, pNo) per template.
// `fell_back` reports operators that saw no pairs and got uniform weights.
TemplateWeights calibrate_weights(std::span<const AlignmentPair> pairs, const TemplateBank& bank,
                                  Backend& backend,
                                  const GenerationParams& params = GenerationParams::qa_defaults(),
                                  bool* fell_back = nullptr);

// Uniformly samples k templates per operator (without replacement, seeded)
// and renormalizes the matching weights; used by the ensemble-size study and
// the single-template ablation.
std::pair<TemplateBank, TemplateWeights> subsample_bank(const TemplateBank& bank,
                                                        const TemplateWeights& weights,
                                                        std::size_t k, std::uint64_t seed);

}  // namespace natver
