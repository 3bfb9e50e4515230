#include "natver/scripted_backend.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "natver/text.hpp"

namespace natver {

namespace {

using json = nlohmann::json;

bool words_equal_ci(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

// Cursor over a canned completion. Yields newline markers and
// whitespace-carrying word pieces in input order.
struct Replay {
    std::string_view text;
    std::size_t cur = 0;

    enum class Kind { Exhausted, Newline, Word };

    struct Next {
        Kind kind = Kind::Exhausted;
        std::string surface;  // ws + word for Kind::Word
        std::string word;
        std::size_t consumed = 0;  // cursor position after taking this piece
    };

    Next peek() const {
        Next n;
        std::size_t i = cur;
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
            if (text[i] == '\n') {
                n.kind = Kind::Newline;
                n.consumed = i + 1;
                return n;
            }
            ++i;
        }
        if (i >= text.size()) {
            n.consumed = text.size();
            return n;
        }
        std::size_t word_start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        n.kind = Kind::Word;
        n.surface = std::string(text.substr(cur, i - cur));
        n.word = std::string(text.substr(word_start, i - word_start));
        n.consumed = i;
        return n;
    }

    void take(const Next& n) { cur = n.consumed; }
};

}  // namespace

ScriptedBackend::ScriptedBackend(const std::filesystem::path& scenario_path) {
    json doc = json::parse(read_text_file(scenario_path));
    for (const auto& [key, value] : doc.items()) {
        Entry e;
        if (value.contains("text")) {
            e.text = value.at("text").get<std::string>();
            e.has_text = true;
        }
        if (value.contains("p_yes")) {
            e.p_yes = value.at("p_yes").get<double>();
            e.has_p_yes = true;
        }
        if (key == "default") {
            if (e.has_text) default_text_ = e.text;
            if (e.has_p_yes) default_p_yes_ = e.p_yes;
        } else {
            entries_[key] = std::move(e);
        }
    }
}

void ScriptedBackend::save(const std::filesystem::path& path) const {
    json doc = json::object();
    doc["default"] = {{"text", default_text_}, {"p_yes", default_p_yes_}};
    for (const auto& [fp, e] : entries_) {
        json entry = json::object();
        if (e.has_text) entry["text"] = e.text;
        if (e.has_p_yes) entry["p_yes"] = e.p_yes;
        doc[fp] = std::move(entry);
    }
    write_text_file(path, doc.dump(2));
}

std::string ScriptedBackend::fingerprint(std::string_view prompt) {
    return to_hex(fnv1a64(collapse_ws(prompt)));
}

void ScriptedBackend::add_response(std::string_view prompt, std::string text) {
    Entry& e = entries_[fingerprint(prompt)];
    e.text = std::move(text);
    e.has_text = true;
}

void ScriptedBackend::add_yes_no(std::string_view prompt, double p_yes) {
    if (p_yes < 0.0 || p_yes > 1.0) throw InputError("p_yes outside [0, 1]");
    Entry& e = entries_[fingerprint(prompt)];
    e.p_yes = p_yes;
    e.has_p_yes = true;
}

void ScriptedBackend::set_default_response(std::string text) {
    default_text_ = std::move(text);
}

void ScriptedBackend::set_default_yes_no(double p_yes) {
    if (p_yes < 0.0 || p_yes > 1.0) throw InputError("p_yes outside [0, 1]");
    default_p_yes_ = p_yes;
}

const ScriptedBackend::Entry* ScriptedBackend::find(const std::string& prompt) const {
    auto it = entries_.find(fingerprint(prompt));
    return it == entries_.end() ? nullptr : &it->second;
}

TokenId ScriptedBackend::intern(const std::string& surface) {
    std::lock_guard lock(mu_);
    auto it = ids_.find(surface);
    if (it != ids_.end()) return it->second;
    TokenId id = static_cast<TokenId>(surfaces_.size());
    ids_.emplace(surface, id);
    surfaces_.push_back(surface);
    return id;
}

TokenId ScriptedBackend::newline_token() {
    return intern("\n");
}

std::size_t ScriptedBackend::vocab_size() {
    std::lock_guard lock(mu_);
    return surfaces_.size();
}

std::vector<TokenId> ScriptedBackend::tokenize(std::string_view text) {
    std::vector<TokenId> out;
    for (const auto& piece : split_pieces(text)) out.push_back(intern(piece.surface()));
    return out;
}

std::string ScriptedBackend::detokenize(std::span<const TokenId> tokens) {
    std::lock_guard lock(mu_);
    std::string out;
    for (TokenId id : tokens) {
        if (id < 0 || static_cast<std::size_t>(id) >= surfaces_.size()) {
            throw InputError("unknown token id");
        }
        out += surfaces_[static_cast<std::size_t>(id)];
    }
    return out;
}

std::string ScriptedBackend::token_text(TokenId id) {
    std::lock_guard lock(mu_);
    if (id < 0 || static_cast<std::size_t>(id) >= surfaces_.size()) {
        throw InputError("unknown token id");
    }
    return surfaces_[static_cast<std::size_t>(id)];
}

std::string ScriptedBackend::token_word(TokenId id) {
    return trim(token_text(id));
}

std::vector<TokenId> ScriptedBackend::generate_constrained(const std::string& prompt,
                                                           const StepMaskFn& step_mask,
                                                           const GenerationParams& params) {
    const Entry* entry = find(prompt);
    const std::string& script =
        entry != nullptr && entry->has_text ? entry->text : default_text_;
    Replay replay{script};

    std::vector<TokenId> out;
    while (static_cast<int>(out.size()) < params.max_tokens) {
        auto mask = step_mask(out);
        if (!mask) break;

        TokenId emitted = -1;
        switch (mask->kind) {
            case ConstraintMask::Kind::AllowOnly: {
                auto piece = replay.peek();
                for (TokenId id : mask->tokens) {
                    std::string word = token_word(id);
                    bool matches =
                        (piece.kind == Replay::Kind::Newline && word.empty() &&
                         token_text(id).find('\n') != std::string::npos) ||
                        (piece.kind == Replay::Kind::Word && word == piece.word);
                    if (matches) {
                        replay.take(piece);
                        emitted = id;
                        break;
                    }
                }
                // Script cannot satisfy the mask: fall back to the first
                // allowed token without consuming scripted text.
                if (emitted < 0) emitted = mask->tokens.front();
                break;
            }
            case ConstraintMask::Kind::Block: {
                while (emitted < 0) {
                    auto piece = replay.peek();
                    if (piece.kind == Replay::Kind::Exhausted) {
                        emitted = newline_token();
                    } else if (piece.kind == Replay::Kind::Newline) {
                        replay.take(piece);
                        emitted = newline_token();
                    } else {
                        TokenId id = intern(piece.surface);
                        bool blocked = false;
                        for (TokenId b : mask->tokens) {
                            if (b == id || words_equal_ci(token_word(b), piece.word)) {
                                blocked = true;
                                break;
                            }
                        }
                        replay.take(piece);
                        if (!blocked) emitted = id;
                    }
                }
                break;
            }
            case ConstraintMask::Kind::Unconstrained: {
                auto piece = replay.peek();
                if (piece.kind == Replay::Kind::Exhausted) {
                    emitted = newline_token();
                } else if (piece.kind == Replay::Kind::Newline) {
                    replay.take(piece);
                    emitted = newline_token();
                } else {
                    replay.take(piece);
                    emitted = intern(piece.surface);
                }
                break;
            }
        }
        out.push_back(emitted);
    }
    return out;
}

FreeGeneration ScriptedBackend::generate_free(const std::string& prompt,
                                              const GenerationParams& params) {
    (void)params;
    const Entry* entry = find(prompt);
    FreeGeneration g;
    g.text = entry != nullptr && entry->has_text ? entry->text : default_text_;
    return g;
}

YesNoScore ScriptedBackend::score_yes_no(const std::string& prompt, const GenerationParams& params) {
    (void)params;
    const Entry* entry = find(prompt);
    double p = entry != nullptr && entry->has_p_yes ? entry->p_yes : default_p_yes_;
    return YesNoScore::from_raw(p, 1.0 - p);
}

}  // namespace natver
