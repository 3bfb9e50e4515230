#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "natver/backend.hpp"
#include "natver/chunker.hpp"
#include "natver/natlog.hpp"

namespace natver {

struct AlignmentPair {
    TextSpan chunk;
    std::string raw_alignment;
    std::string alignment;  // post-processed; every token occurs in the evidence
    std::string explanation;
    std::optional<Signal> signal;
    bool degraded = false;  // block missing or truncated in the completion
};

struct SignalLexicon {
    std::vector<std::string> support;
    std::vector<std::string> refute;

    static SignalLexicon defaults();
    static SignalLexicon from_file(const std::filesystem::path& path);
    void validate() const;  // lists must be disjoint
};

// Fills {E}, {C} and expands the chunk-list line ({CH-i} with {i} as the
// 1-based index; explicit {CH-1}.. markers are also honored).
std::string build_alignment_prompt(std::string_view prompt_template, std::string_view evidence,
                                   std::string_view claim, const std::vector<TextSpan>& chunks);

// Aligns every chunk to evidence text with three decoding modes: chunk lines
// are inserted verbatim (forced tokens), alignment lines are generated under
// a mask blocking tokens that occur only in the claim, explanation lines are
// unconstrained. Alignments are then post-filtered against the evidence and
// explanations parsed for signals.
std::vector<AlignmentPair> align(const std::string& claim, const std::string& evidence,
                                 const ClaimChunks& chunks, Backend& backend,
                                 std::string_view prompt_template, const SignalLexicon& lexicon,
                                 const GenerationParams& params = GenerationParams::task_defaults());

// Unconstrained variant: one free completion parsed into blocks. The
// faithfulness post-filter is optional because the constrained-decoding
// ablation drops masking and filtering as one switch.
std::vector<AlignmentPair> align_unconstrained(
    const std::string& claim, const std::string& evidence, const ClaimChunks& chunks,
    Backend& backend, std::string_view prompt_template, const SignalLexicon& lexicon,
    bool apply_post_filter, const GenerationParams& params = GenerationParams::task_defaults());

// Keeps only tokens of the raw alignment that occur in the evidence
// (case-insensitive, punctuation stripped at word edges); order preserved,
// result possibly empty. Idempotent.
std::string post_process_alignment(std::string_view raw_alignment, std::string_view evidence);

// Precision-first keyword search: a signal is returned only when exactly one
// of the two keyword lists matches.
std::optional<Signal> parse_signal(std::string_view explanation, const SignalLexicon& lexicon);

}  // namespace natver
