#include "natver/chunker.hpp"

#include <algorithm>

#include "natver/text.hpp"

namespace natver {

namespace {

// Character span of each queue token's non-whitespace content, located
// left-to-right in the claim.
std::vector<TextSpan> locate_token_words(const std::string& claim, Backend& backend,
                                         const std::vector<TokenId>& queue) {
    std::vector<TextSpan> spans;
    spans.reserve(queue.size());
    std::size_t pos = 0;
    for (TokenId id : queue) {
        std::string word = trim(backend.token_text(id));
        TextSpan span;
        if (!word.empty()) {
            std::size_t at = claim.find(word, pos);
            if (at != std::string::npos) {
                span.start = at;
                span.end = at + word.size();
                span.text = word;
                pos = span.end;
            }
        }
        spans.push_back(std::move(span));
    }
    return spans;
}

TextSpan make_chunk_span(const std::string& claim, const std::vector<TextSpan>& word_spans,
                         std::size_t first, std::size_t last) {
    // Skip tokens without located words at the edges of the range.
    while (first < last && word_spans[first].text.empty()) ++first;
    std::size_t tail = last;
    while (tail > first && word_spans[tail - 1].text.empty()) --tail;
    TextSpan span;
    if (first >= tail) return span;  // nothing but whitespace tokens
    span.start = word_spans[first].start;
    span.end = word_spans[tail - 1].end;
    span.text = claim.substr(span.start, span.end - span.start);
    return span;
}

}  // namespace

std::string build_chunk_prompt(std::string_view prompt_template, std::string_view claim) {
    return replace_marker(std::string(prompt_template), "{C}", claim);
}

ClaimChunks chunk(const std::string& claim, Backend& backend, std::string_view prompt_template,
                  const GenerationParams& params) {
    if (is_blank(claim)) throw InputError("claim is empty");

    std::vector<TokenId> queue = backend.tokenize(claim);
    std::vector<TextSpan> word_spans = locate_token_words(claim, backend, queue);
    std::vector<TokenId> newline = backend.tokenize("\n");
    if (newline.empty()) throw InputError("backend produced no newline token");
    TokenId newline_id = newline.front();

    std::string prompt = build_chunk_prompt(prompt_template, claim);
    GenerationParams step_params = params;
    step_params.max_tokens = static_cast<int>(2 * queue.size() + 8);

    std::size_t queue_index = 0;
    std::size_t seen = 0;
    std::vector<std::size_t> breaks;
    auto step = [&](std::span<const TokenId> emitted) -> std::optional<ConstraintMask> {
        if (emitted.size() > seen) {
            seen = emitted.size();
            TokenId last = emitted.back();
            if (queue_index < queue.size() && last == queue[queue_index]) {
                ++queue_index;
            } else {
                breaks.push_back(queue_index);
            }
        }
        if (queue_index >= queue.size()) return std::nullopt;
        return ConstraintMask::allow_only({queue[queue_index], newline_id});
    };
    backend.generate_constrained(prompt, step, step_params);

    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    ClaimChunks out;
    out.claim = claim;
    out.separator_positions = breaks;
    std::size_t start = 0;
    for (std::size_t b : breaks) {
        out.chunks.push_back(make_chunk_span(claim, word_spans, start, b));
        start = b;
    }
    out.chunks.push_back(make_chunk_span(claim, word_spans, start, queue.size()));
    return normalize_chunks(std::move(out));
}

ClaimChunks chunk_unconstrained(const std::string& claim, Backend& backend,
                                std::string_view prompt_template, const GenerationParams& params) {
    if (is_blank(claim)) throw InputError("claim is empty");

    std::string prompt = build_chunk_prompt(prompt_template, claim);
    FreeGeneration gen = backend.generate_free(prompt, params);

    ClaimChunks out;
    out.claim = claim;
    out.constrained = false;
    std::size_t pos = 0;
    std::size_t line_start = 0;
    std::string_view text = gen.text;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        std::string line = trim(text.substr(line_start, line_end - line_start));
        if (!line.empty()) {
            TextSpan span;
            std::size_t at = claim.find(line, pos);
            if (at != std::string::npos) {
                span.start = at;
                span.end = at + line.size();
                pos = span.end;
            }
            span.text = line;  // kept even when not located in the claim
            out.chunks.push_back(std::move(span));
        }
        if (line_end == text.size()) break;
        line_start = line_end + 1;
    }
    if (out.chunks.empty()) {
        TextSpan whole;
        whole.start = 0;
        whole.end = claim.size();
        whole.text = claim;
        out.chunks.push_back(std::move(whole));
    }
    return out;
}

ClaimChunks normalize_chunks(ClaimChunks chunks) {
    std::vector<TextSpan> kept;
    kept.reserve(chunks.chunks.size());
    for (auto& c : chunks.chunks) {
        if (!is_blank(c.text)) kept.push_back(std::move(c));
    }
    chunks.chunks = std::move(kept);
    return chunks;
}

std::string reconstruct(const ClaimChunks& chunks) {
    const std::string& claim = chunks.claim;
    std::string out;
    std::size_t pos = 0;
    for (const auto& c : chunks.chunks) {
        if (c.start > pos) out += claim.substr(pos, c.start - pos);
        out += c.text;
        pos = c.end;
    }
    if (pos < claim.size()) out += claim.substr(pos);
    return out;
}

}  // namespace natver
