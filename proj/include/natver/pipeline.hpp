#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "natver/aligner.hpp"
#include "natver/assigner.hpp"
#include "natver/backend.hpp"
#include "natver/chunker.hpp"
#include "natver/natlog.hpp"

namespace natver {

struct AblationFlags {
    bool no_weighted_templates = false;  // uniform weights
    bool no_qa_ensembles = false;        // one template sampled per operator
    bool no_constrained_decoding = false;  // free generation, no post-filter
    bool no_alignment_signals = false;   // full candidate list for every pair

    bool operator==(const AblationFlags&) const = default;
};

struct PipelineConfig {
    double alpha = 0.5;
    AblationFlags ablations;
    std::optional<std::size_t> ensemble_size;
    std::uint64_t seed = 0;
    int jobs = 1;

    std::filesystem::path templates_dir = "templates";
    std::filesystem::path signals_path;  // empty: built-in lexicon
    std::filesystem::path weights_path;  // empty: uniform weights
};

// Per-stage record of what actually ran, for logs and ablation diffing.
struct StageTrace {
    bool chunk_constrained = true;
    std::vector<std::string> chunks;
    bool align_constrained = true;
    bool align_filtered = true;
    std::vector<std::string> raw_alignments;
    std::vector<std::string> alignments;
    std::vector<std::string> explanations;
    std::vector<std::string> signals;  // "support" / "refute" / "none"
    std::vector<std::vector<std::string>> candidate_lists;
    bool weights_uniform = true;
    std::size_t ensemble_size_used = 0;
};

struct BackendCallCounts {
    std::size_t tokenize = 0;
    std::size_t constrained = 0;
    std::size_t free = 0;
    std::size_t yes_no = 0;
};

struct VerificationResult {
    std::string id;
    std::string claim;
    Verdict verdict = Verdict::NotEnoughInfo;
    std::vector<ProofTriple> proof;
    VerdictTrace trace;
    StageTrace stages;
    double chunk_ms = 0.0;
    double align_ms = 0.0;
    double assign_ms = 0.0;
    double total_ms = 0.0;
    BackendCallCounts calls;
    std::string error;  // set when a stage failed (batch mode keeps partials)

    std::string to_json_line() const;  // single-line JSON for result streams
};

struct ClaimEvidence {
    std::string id;
    std::string claim;
    std::string evidence;
};

struct DirectQaOutcome {
    Verdict verdict = Verdict::NotEnoughInfo;
    bool parsed = false;
    std::string completion;
};

// Maps a Direct-QA completion to a verdict: letter answers (A/B/C) and label
// words both count; earliest match in the completion wins; anything
// unparseable falls back to NotEnoughInfo with parsed = false.
DirectQaOutcome parse_direct_qa_answer(std::string_view completion);

class Pipeline {
  public:
    Pipeline(std::shared_ptr<Backend> backend, PipelineConfig config);

    // chunk -> align -> assign -> execute; the verdict is re-derived from the
    // emitted proof, never taken from the model directly.
    VerificationResult verify(const std::string& claim, const std::string& evidence,
                              const std::string& id = "") const;

    DirectQaOutcome direct_qa(const std::string& claim, const std::string& evidence) const;

    // Order-preserving bounded-concurrency batch; per-instance failures are
    // recorded on the result and do not stop the batch.
    std::vector<VerificationResult> verify_batch(std::span<const ClaimEvidence> instances) const;

    // Chunk + align only (the calibration pass consumes alignment pairs).
    std::vector<AlignmentPair> alignment_pairs(const std::string& claim,
                                               const std::string& evidence) const;

    const PipelineConfig& config() const { return config_; }
    const TemplateBank& bank() const { return effective_bank_; }
    const TemplateWeights& weights() const { return effective_weights_; }
    const SignalLexicon& lexicon() const { return lexicon_; }
    const std::string& chunk_template() const { return chunk_template_; }
    const std::string& alignment_template() const { return alignment_template_; }
    const std::string& direct_qa_template() const { return direct_qa_template_; }

  private:
    std::shared_ptr<Backend> backend_;
    PipelineConfig config_;
    std::string chunk_template_;
    std::string alignment_template_;
    std::string direct_qa_template_;
    SignalLexicon lexicon_;
    TemplateBank effective_bank_;
    TemplateWeights effective_weights_;
    bool weights_uniform_ = true;
};

}  // namespace natver
