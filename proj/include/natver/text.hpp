#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace natver {

// A piece is a run of whitespace followed by a run of non-whitespace.
// Concatenating ws + word over all pieces restores the input byte-for-byte;
// trailing whitespace yields a final piece with an empty word.
struct Piece {
    std::string ws;
    std::string word;

    std::string surface() const { return ws + word; }
};

std::vector<Piece> split_pieces(std::string_view text);

// Non-whitespace runs only.
std::vector<std::string> split_words(std::string_view text);

bool is_blank(std::string_view text);

std::string lower_ascii(std::string_view s);

// Strips ASCII punctuation from both edges and lowercases. May return "".
std::string normalize_word(std::string_view w);

std::string trim(std::string_view s);

// Collapses whitespace runs to single spaces and trims; used for prompt
// fingerprinting so that formatting noise does not change the key.
std::string collapse_ws(std::string_view s);

// Substring search where the match may not be flanked by ASCII letters,
// so "consistent with" does not fire inside "inconsistent with".
bool contains_keyword(std::string_view haystack, std::string_view keyword);

// Replaces every occurrence of an exact marker such as "{C}".
std::string replace_marker(std::string text, std::string_view marker, std::string_view value);

// Replaces a single-letter placeholder (X or Y) only where it stands alone
// as a word, leaving letters inside other words untouched.
std::string replace_word_placeholder(std::string_view text, char placeholder, std::string_view value);

std::uint64_t fnv1a64(std::string_view s);
std::string to_hex(std::uint64_t v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace natver
