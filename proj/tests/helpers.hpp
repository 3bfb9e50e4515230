#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "natver/aligner.hpp"
#include "natver/assigner.hpp"
#include "natver/chunker.hpp"
#include "natver/scripted_backend.hpp"
#include "natver/text.hpp"

namespace natver::testing {

inline std::filesystem::path assets_dir() {
    return std::filesystem::path(NATVER_ASSETS_DIR);
}

inline std::filesystem::path templates_dir() {
    return assets_dir() / "templates";
}

inline std::string chunk_template() {
    return read_text_file(templates_dir() / "chunking.txt");
}

inline std::string alignment_template() {
    return read_text_file(templates_dir() / "alignment.txt");
}

// Canned chunking output: the claim's own token surfaces with a newline
// inserted before each break index.
inline std::string chunked_text(const std::string& claim, const std::vector<std::size_t>& breaks) {
    auto pieces = split_pieces(claim);
    std::string out;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (std::find(breaks.begin(), breaks.end(), i) != breaks.end() && i > 0) out += '\n';
        out += pieces[i].surface();
    }
    return out;
}

// Scripts the chunking stage: breaks are token indices (0-based) where a new
// chunk starts.
inline void script_chunking(ScriptedBackend& backend, const std::string& claim,
                            const std::vector<std::size_t>& breaks) {
    backend.add_response(build_chunk_prompt(chunk_template(), claim), chunked_text(claim, breaks));
}

struct AlignmentBlock {
    std::string alignment;
    std::string explanation;
};

// Canned alignment output in the block layout the constrained decode forces.
inline std::string alignment_script(const std::vector<std::string>& chunk_texts,
                                    const std::vector<AlignmentBlock>& blocks) {
    std::string out;
    for (std::size_t i = 0; i < chunk_texts.size(); ++i) {
        out += "Chunk: " + chunk_texts[i] + "\n";
        out += "Alignment: " + (i < blocks.size() ? blocks[i].alignment : "") + "\n";
        out += "Explanation: " + (i < blocks.size() ? blocks[i].explanation : "") + "\n";
    }
    return out;
}

inline void script_alignment(ScriptedBackend& backend, const std::string& claim,
                             const std::string& evidence,
                             const std::vector<std::string>& chunk_texts,
                             const std::vector<AlignmentBlock>& blocks) {
    std::vector<TextSpan> spans;
    for (const auto& text : chunk_texts) {
        TextSpan span;
        span.text = text;
        spans.push_back(span);
    }
    std::string prompt = build_alignment_prompt(alignment_template(), evidence, claim, spans);
    backend.add_response(prompt, alignment_script(chunk_texts, blocks));
}

// Scripts every template of an operator to the same Yes probability for a
// given (chunk, alignment) pair.
inline void script_natop(ScriptedBackend& backend, const TemplateBank& bank, NatOp op,
                         const std::string& chunk, const std::string& alignment, double p_yes) {
    for (const auto& tmpl : bank.templates.at(op)) {
        backend.add_yes_no(instantiate_template(tmpl, chunk, alignment, bank.suffix), p_yes);
    }
}

// Random claim text with uneven whitespace and punctuation.
inline std::string random_claim(std::mt19937_64& rng, std::size_t max_words = 12) {
    static const char* words[] = {"alpha", "Beta",  "gamma,", "delta.", "x42",
                                  "Publi", "1999",  "(note)", "it's",   "long-term",
                                  "word",  "claim", "data;",  "Zed"};
    static const char* gaps[] = {" ", "  ", "\t", " "};
    std::uniform_int_distribution<std::size_t> n_words(1, max_words);
    std::uniform_int_distribution<std::size_t> word_pick(0, std::size(words) - 1);
    std::uniform_int_distribution<std::size_t> gap_pick(0, std::size(gaps) - 1);
    std::uniform_int_distribution<int> edge(0, 3);

    std::string out;
    if (edge(rng) == 0) out += gaps[gap_pick(rng)];
    std::size_t n = n_words(rng);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) out += gaps[gap_pick(rng)];
        out += words[word_pick(rng)];
    }
    if (edge(rng) == 0) out += gaps[gap_pick(rng)];
    return out;
}

}  // namespace natver::testing
