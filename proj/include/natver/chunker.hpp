#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "natver/backend.hpp"
#include "natver/natlog.hpp"

namespace natver {

// A claim split into contiguous, non-overlapping spans. Chunk spans carry
// character offsets into the claim, so stitching the chunks back together
// with the claim's own inter-chunk whitespace restores it byte-for-byte.
struct ClaimChunks {
    std::string claim;
    std::vector<TextSpan> chunks;
    std::vector<std::size_t> separator_positions;  // token queue indices where breaks landed
    bool constrained = true;
};

std::string build_chunk_prompt(std::string_view prompt_template, std::string_view claim);

// Token-queue constrained chunking: the claim is tokenized into a queue and
// decoding may only emit the front of the queue or a newline, so the output
// can neither drop, invent, nor reorder claim tokens. Newlines become chunk
// boundaries.
ClaimChunks chunk(const std::string& claim, Backend& backend, std::string_view prompt_template,
                  const GenerationParams& params = GenerationParams::task_defaults());

// Unconstrained variant (ablation / capability fallback): free generation
// split on newlines, spans recovered by best-effort substring search.
ClaimChunks chunk_unconstrained(const std::string& claim, Backend& backend,
                                std::string_view prompt_template,
                                const GenerationParams& params = GenerationParams::task_defaults());

// Drops empty and whitespace-only segments left behind by consecutive
// newline emissions. Identity on already-clean chunk lists.
ClaimChunks normalize_chunks(ClaimChunks chunks);

// Recomposition from spans: claim prefix + chunk texts + the original
// whitespace between them. Equals the claim whenever spans are valid.
std::string reconstruct(const ClaimChunks& chunks);

}  // namespace natver
