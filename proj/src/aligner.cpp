#include "natver/aligner.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "natver/text.hpp"

namespace natver {

namespace {

using json = nlohmann::json;

constexpr std::size_t kSegmentTokenCap = 96;

std::set<std::string> normalized_word_set(std::string_view text) {
    std::set<std::string> words;
    for (const auto& w : split_words(text)) {
        std::string n = normalize_word(w);
        if (!n.empty()) words.insert(std::move(n));
    }
    return words;
}

// Token ids of the claim whose words never occur in the evidence.
std::vector<TokenId> claim_only_tokens(const std::string& claim, const std::string& evidence,
                                       Backend& backend) {
    std::set<std::string> evidence_words = normalized_word_set(evidence);
    std::vector<TokenId> blocked;
    std::set<TokenId> seen;
    for (TokenId id : backend.tokenize(claim)) {
        if (seen.contains(id)) continue;
        seen.insert(id);
        std::string n = normalize_word(trim(backend.token_text(id)));
        if (!n.empty() && !evidence_words.contains(n)) blocked.push_back(id);
    }
    return blocked;
}

// Drives the block-per-chunk output structure through one constrained
// generation: forced scaffold tokens, masked alignment segment, free
// explanation segment, repeated per chunk.
struct AlignDrive {
    Backend& backend;
    const std::vector<TextSpan>& chunks;
    std::vector<TokenId> blocked;

    enum class Phase { Scaffold, Alignment, ExplanationScaffold, Explanation, Done };

    Phase phase = Phase::Scaffold;
    std::size_t chunk_index = 0;
    std::vector<TokenId> forced;
    std::size_t forced_index = 0;
    std::size_t segment_tokens = 0;
    std::size_t seen = 0;

    struct Block {
        std::string alignment;
        std::string explanation;
        bool alignment_done = false;
        bool explanation_done = false;
    };
    std::vector<Block> blocks;

    AlignDrive(Backend& b, const std::vector<TextSpan>& ch, std::vector<TokenId> blk)
        : backend(b), chunks(ch), blocked(std::move(blk)) {
        blocks.resize(chunks.size());
        load_scaffold();
    }

    // The newline is forced as its own token so scenario scripts that spell
    // out the full block layout stay in lockstep with the scaffold.
    void load_scaffold() {
        forced = backend.tokenize("Chunk: " + chunks[chunk_index].text);
        std::vector<TokenId> rest = backend.tokenize("\n");
        forced.insert(forced.end(), rest.begin(), rest.end());
        rest = backend.tokenize("Alignment:");
        forced.insert(forced.end(), rest.begin(), rest.end());
        forced_index = 0;
    }

    bool token_ends_line(TokenId id) {
        return backend.token_text(id).find('\n') != std::string::npos;
    }

    std::optional<ConstraintMask> operator()(std::span<const TokenId> emitted) {
        if (emitted.size() > seen) {
            seen = emitted.size();
            consume(emitted.back());
        }
        switch (phase) {
            case Phase::Scaffold:
            case Phase::ExplanationScaffold:
                return ConstraintMask::allow_only({forced[forced_index]});
            case Phase::Alignment:
                if (blocked.empty()) return ConstraintMask::none();
                return ConstraintMask::block(blocked);
            case Phase::Explanation:
                return ConstraintMask::none();
            case Phase::Done:
                return std::nullopt;
        }
        return std::nullopt;
    }

    void consume(TokenId id) {
        switch (phase) {
            case Phase::Scaffold:
            case Phase::ExplanationScaffold:
                if (++forced_index >= forced.size()) {
                    bool explaining = phase == Phase::ExplanationScaffold;
                    phase = explaining ? Phase::Explanation : Phase::Alignment;
                    segment_tokens = 0;
                }
                break;
            case Phase::Alignment: {
                Block& block = blocks[chunk_index];
                if (token_ends_line(id) || ++segment_tokens > kSegmentTokenCap) {
                    block.alignment_done = true;
                    phase = Phase::ExplanationScaffold;
                    forced = backend.tokenize("Explanation:");
                    forced_index = 0;
                } else {
                    block.alignment += backend.token_text(id);
                }
                break;
            }
            case Phase::Explanation: {
                Block& block = blocks[chunk_index];
                if (token_ends_line(id) || ++segment_tokens > kSegmentTokenCap) {
                    block.explanation_done = true;
                    if (++chunk_index >= chunks.size()) {
                        phase = Phase::Done;
                    } else {
                        phase = Phase::Scaffold;
                        load_scaffold();
                    }
                } else {
                    block.explanation += backend.token_text(id);
                }
                break;
            }
            case Phase::Done:
                break;
        }
    }
};

AlignmentPair finish_pair(const TextSpan& chunk, std::string raw, std::string explanation,
                          bool complete, const std::string& evidence,
                          const SignalLexicon& lexicon, bool apply_post_filter) {
    AlignmentPair pair;
    pair.chunk = chunk;
    pair.raw_alignment = trim(raw);
    pair.alignment =
        apply_post_filter ? post_process_alignment(pair.raw_alignment, evidence) : pair.raw_alignment;
    pair.explanation = trim(explanation);
    pair.degraded = !complete;
    if (complete) pair.signal = parse_signal(pair.explanation, lexicon);
    return pair;
}

}  // namespace

SignalLexicon SignalLexicon::defaults() {
    SignalLexicon lex;
    lex.support = {"supports", "confirms", "matches", "consistent with", "is a paraphrase"};
    lex.refute = {"refutes", "contradicts", "does not match", "inconsistent", "negates"};
    return lex;
}

SignalLexicon SignalLexicon::from_file(const std::filesystem::path& path) {
    json doc = json::parse(read_text_file(path));
    SignalLexicon lex;
    for (const auto& kw : doc.at("support")) lex.support.push_back(lower_ascii(kw.get<std::string>()));
    for (const auto& kw : doc.at("refute")) lex.refute.push_back(lower_ascii(kw.get<std::string>()));
    lex.validate();
    return lex;
}

void SignalLexicon::validate() const {
    for (const auto& s : support) {
        if (std::find(refute.begin(), refute.end(), s) != refute.end()) {
            throw InputError("signal keyword in both lists: " + s);
        }
    }
}

std::string build_alignment_prompt(std::string_view prompt_template, std::string_view evidence,
                                   std::string_view claim, const std::vector<TextSpan>& chunks) {
    std::string text = replace_marker(std::string(prompt_template), "{E}", evidence);
    text = replace_marker(std::move(text), "{C}", claim);

    // Expand any line containing {CH-i} once per chunk.
    std::string out;
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        bool last = line_end == std::string::npos;
        if (last) line_end = text.size();
        std::string line = text.substr(line_start, line_end - line_start);
        if (line.find("{CH-i}") != std::string::npos) {
            for (std::size_t i = 0; i < chunks.size(); ++i) {
                std::string expanded = replace_marker(line, "{CH-i}", chunks[i].text);
                expanded = replace_marker(std::move(expanded), "{i}", std::to_string(i + 1));
                out += expanded;
                out += '\n';
            }
        } else {
            out += line;
            if (!last) out += '\n';
        }
        if (last) break;
        line_start = line_end + 1;
    }
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        out = replace_marker(std::move(out), "{CH-" + std::to_string(i + 1) + "}", chunks[i].text);
    }
    return out;
}

std::vector<AlignmentPair> align(const std::string& claim, const std::string& evidence,
                                 const ClaimChunks& chunks, Backend& backend,
                                 std::string_view prompt_template, const SignalLexicon& lexicon,
                                 const GenerationParams& params) {
    if (chunks.chunks.empty()) throw InputError("no chunks to align");
    if (is_blank(evidence)) throw InputError("evidence is empty");

    std::string prompt = build_alignment_prompt(prompt_template, evidence, claim, chunks.chunks);
    AlignDrive drive(backend, chunks.chunks, claim_only_tokens(claim, evidence, backend));

    GenerationParams gen = params;
    gen.max_tokens = static_cast<int>(chunks.chunks.size() * (2 * kSegmentTokenCap + 64) + 32);
    backend.generate_constrained(prompt, std::ref(drive), gen);

    std::vector<AlignmentPair> pairs;
    pairs.reserve(chunks.chunks.size());
    for (std::size_t i = 0; i < chunks.chunks.size(); ++i) {
        const auto& block = drive.blocks[i];
        bool complete = block.alignment_done && block.explanation_done;
        pairs.push_back(finish_pair(chunks.chunks[i], block.alignment, block.explanation, complete,
                                    evidence, lexicon, /*apply_post_filter=*/true));
    }
    return pairs;
}

std::vector<AlignmentPair> align_unconstrained(const std::string& claim, const std::string& evidence,
                                               const ClaimChunks& chunks, Backend& backend,
                                               std::string_view prompt_template,
                                               const SignalLexicon& lexicon, bool apply_post_filter,
                                               const GenerationParams& params) {
    if (chunks.chunks.empty()) throw InputError("no chunks to align");
    if (is_blank(evidence)) throw InputError("evidence is empty");

    std::string prompt = build_alignment_prompt(prompt_template, evidence, claim, chunks.chunks);
    FreeGeneration gen = backend.generate_free(prompt, params);

    struct Block {
        std::string alignment;
        std::string explanation;
        bool complete = false;
    };
    std::vector<Block> blocks;

    std::string_view text = gen.text;
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        std::string line = trim(text.substr(line_start, line_end - line_start));
        std::string lowered = lower_ascii(line);
        if (lowered.starts_with("chunk:")) {
            blocks.emplace_back();
        } else if (lowered.starts_with("alignment:") && !blocks.empty()) {
            blocks.back().alignment = trim(line.substr(std::string("alignment:").size()));
        } else if (lowered.starts_with("explanation:") && !blocks.empty()) {
            blocks.back().explanation = trim(line.substr(std::string("explanation:").size()));
            blocks.back().complete = true;
        }
        if (line_end == text.size()) break;
        line_start = line_end + 1;
    }

    std::vector<AlignmentPair> pairs;
    pairs.reserve(chunks.chunks.size());
    for (std::size_t i = 0; i < chunks.chunks.size(); ++i) {
        if (i < blocks.size()) {
            pairs.push_back(finish_pair(chunks.chunks[i], blocks[i].alignment, blocks[i].explanation,
                                        blocks[i].complete, evidence, lexicon, apply_post_filter));
        } else {
            pairs.push_back(finish_pair(chunks.chunks[i], "", "", false, evidence, lexicon,
                                        apply_post_filter));
        }
    }
    return pairs;
}

std::string post_process_alignment(std::string_view raw_alignment, std::string_view evidence) {
    std::set<std::string> evidence_words = normalized_word_set(evidence);
    std::string out;
    for (const auto& w : split_words(raw_alignment)) {
        std::string n = normalize_word(w);
        if (n.empty() || !evidence_words.contains(n)) continue;
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

std::optional<Signal> parse_signal(std::string_view explanation, const SignalLexicon& lexicon) {
    std::string lowered = lower_ascii(explanation);
    bool support = std::any_of(lexicon.support.begin(), lexicon.support.end(),
                               [&](const auto& kw) { return contains_keyword(lowered, kw); });
    bool refute = std::any_of(lexicon.refute.begin(), lexicon.refute.end(),
                              [&](const auto& kw) { return contains_keyword(lowered, kw); });
    if (support && !refute) return Signal::Support;
    if (refute && !support) return Signal::Refute;
    return std::nullopt;
}

}  // namespace natver
