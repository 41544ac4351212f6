#pragma once

#include "parlvote/corpus.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace parlvote::bias {

class LexiconError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lowercases ASCII, maps the typographic apostrophe (U+2019) to ', and
/// collapses whitespace runs to one space.
std::string normalize_for_matching(std::string_view text);

/// Whole-word occurrences of `phrase` in `normalized_text`. Both must be
/// normalized. A match needs a non-word byte (or the text edge) on each side;
/// letters, digits and bytes >= 0x80 are word bytes.
size_t count_phrase(std::string_view normalized_text, std::string_view normalized_phrase);
bool contains_phrase(std::string_view normalized_text, std::string_view normalized_phrase);

struct LexiconEntry {
    std::string term;  // normalized
    Gender gender = Gender::Male;
    std::vector<std::string> forms;  // term followed by its hand-listed inflections, normalized

    bool matches(std::string_view normalized_text) const;
    size_t mentions(std::string_view normalized_text) const;
};

/// term -> gender map read from `term<TAB>gender[<TAB>inflection,inflection...]`
/// lines. Blank lines and lines starting with '#' are skipped. Terms must be
/// unique; entries keep file order.
class Lexicon {
public:
    Lexicon() = default;
    explicit Lexicon(std::vector<LexiconEntry> entries);

    static Lexicon parse(std::string_view content, std::string_view source = "<lexicon>");
    static Lexicon load(const std::filesystem::path& path);

    const std::vector<LexiconEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

private:
    std::vector<LexiconEntry> entries_;
};

/// Stylistic cue -> assumed gender. Must be non-empty.
struct StereotypeLexicon : Lexicon {
    StereotypeLexicon() = default;
    explicit StereotypeLexicon(Lexicon l);
    static StereotypeLexicon load(const std::filesystem::path& path);
};

/// Topic keyword -> stereotyped gender.
struct TopicLexicon : Lexicon {
    TopicLexicon() = default;
    explicit TopicLexicon(Lexicon l) : Lexicon(std::move(l)) {}
    static TopicLexicon load(const std::filesystem::path& path);
};

}  // namespace parlvote::bias
