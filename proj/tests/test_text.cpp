#include <doctest.h>

#include "natver/text.hpp"

using namespace natver;

TEST_CASE("split_pieces restores input exactly") {
    for (const std::string text :
         {"", "a", "a b", "  a  b ", "\ta\nb\t", "one", "x  y\tz ", " \n "}) {
        std::string joined;
        for (const auto& p : split_pieces(text)) joined += p.surface();
        CHECK(joined == text);
    }
}

TEST_CASE("split_words drops whitespace") {
    auto words = split_words("  a  b\tc ");
    REQUIRE(words.size() == 3);
    CHECK(words[0] == "a");
    CHECK(words[2] == "c");
}

TEST_CASE("normalize_word strips edge punctuation and lowercases") {
    CHECK(normalize_word("Paris,") == "paris");
    CHECK(normalize_word("(1999)") == "1999");
    CHECK(normalize_word("it's") == "it's");
    CHECK(normalize_word "" == "");
    CHECK(normalize_word("...") == "");
}

TEST_CASE("contains_keyword respects word boundaries") {
    CHECK(contains_keyword("this supports the claim", "supports"));
    CHECK(!contains_keyword("inconsistent with", "consistent with"));
    CHECK(contains_keyword("fully consistent with it", "consistent with"));
    CHECK(!contains_keyword("unsupported", "supported"));
}

TEST_CASE("replace_word_placeholder only hits standalone letters") {
    CHECK(replace_word_placeholder("Is X a paraphrase of Y?", 'X', "foo") ==
          "Is foo a paraphrase of Y?");
    CHECK(replace_word_placeholder("eXample X", 'X', "z") == "eXample z");
}

TEST_CASE("collapse_ws") {
    CHECK(collapse_ws("  a \n b  ") == "a b");
    CHECK(collapse_ws("") == "");
}
