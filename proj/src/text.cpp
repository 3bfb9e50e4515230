#include "natver/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace natver {

namespace {

bool is_ws(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_letter(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::vector<Piece> split_pieces(std::string_view text) {
    std::vector<Piece> pieces;
    std::size_t i = 0;
    while (i < text.size()) {
        Piece p;
        while (i < text.size() && is_ws(text[i])) p.ws.push_back(text[i++]);
        while (i < text.size() && !is_ws(text[i])) p.word.push_back(text[i++]);
        pieces.push_back(std::move(p));
    }
    return pieces;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    for (auto& p : split_pieces(text)) {
        if (!p.word.empty()) words.push_back(std::move(p.word));
    }
    return words;
}

bool is_blank(std::string_view text) {
    for (char c : text) {
        if (!is_ws(c)) return false;
    }
    return true;
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string normalize_word(std::string_view w) {
    std::size_t b = 0;
    std::size_t e = w.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(w[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(w[e - 1]))) --e;
    return lower_ascii(w.substr(b, e - b));
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_ws(s[b])) ++b;
    while (e > b && is_ws(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_ws(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

bool contains_keyword(std::string_view haystack, std::string_view keyword) {
    if (keyword.empty()) return false;
    std::size_t pos = 0;
    while ((pos = haystack.find(keyword, pos)) != std::string_view::npos) {
        bool left_ok = pos == 0 || !is_letter(haystack[pos - 1]);
        std::size_t end = pos + keyword.size();
        bool right_ok = end >= haystack.size() || !is_letter(haystack[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

std::string replace_marker(std::string text, std::string_view marker, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(marker, pos)) != std::string::npos) {
        text.replace(pos, marker.size(), value);
        pos += value.size();
    }
    return text;
}

std::string replace_word_placeholder(std::string_view text, char placeholder, std::string_view value) {
    std::string out;
    out.reserve(text.size() + value.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == placeholder) {
            bool left_ok = i == 0 || !is_letter(text[i - 1]);
            bool right_ok = i + 1 >= text.size() || !is_letter(text[i + 1]);
            if (left_ok && right_ok) {
                out.append(value);
                continue;
            }
        }
        out.push_back(c);
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace natver
