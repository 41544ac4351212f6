#include "parlvote/bias/lexicon.hpp"

#include "parlvote/util/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace parlvote::bias {

std::string normalize_for_matching(std::string_view text) {
    std::string replaced;
    replaced.reserve(text.size());
    for (size_t i = 0; i < text.size(); ++i) {
        if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
            static_cast<unsigned char>(text[i + 1]) == 0x80 && static_cast<unsigned char>(text[i + 2]) == 0x99) {
            replaced.push_back('\'');
            i += 2;
            continue;
        }
        replaced.push_back(text[i]);
    }
    return text::collapse_whitespace(text::to_lower(replaced));
}

namespace {
// Position of the next whole-word match at or after `from`, or npos.
size_t next_match(std::string_view text, std::string_view phrase, size_t from) {
    for (size_t pos = text.find(phrase, from); pos != std::string_view::npos; pos = text.find(phrase, pos + 1)) {
        bool left_ok = pos == 0 || !text::is_word_byte(static_cast<unsigned char>(text[pos - 1]));
        size_t end = pos + phrase.size();
        bool right_ok = end == text.size() || !text::is_word_byte(static_cast<unsigned char>(text[end]));
        if (left_ok && right_ok) return pos;
    }
    return std::string_view::npos;
}
}  // namespace

size_t count_phrase(std::string_view text, std::string_view phrase) {
    if (phrase.empty()) return 0;
    size_t count = 0;
    for (size_t pos = next_match(text, phrase, 0); pos != std::string_view::npos;
         pos = next_match(text, phrase, pos + 1))
        ++count;
    return count;
}

bool contains_phrase(std::string_view text, std::string_view phrase) {
    return !phrase.empty() && next_match(text, phrase, 0) != std::string_view::npos;
}

bool LexiconEntry::matches(std::string_view normalized_text) const {
    for (const auto& f : forms)
        if (contains_phrase(normalized_text, f)) return true;
    return false;
}

size_t LexiconEntry::mentions(std::string_view normalized_text) const {
    size_t n = 0;
    for (const auto& f : forms) n += count_phrase(normalized_text, f);
    return n;
}

Lexicon::Lexicon(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {
    std::set<std::string> seen;
    for (auto& e : entries_) {
        e.term = normalize_for_matching(e.term);
        if (e.term.empty()) throw LexiconError("empty lexicon term");
        if (!seen.insert(e.term).second) throw LexiconError("duplicate lexicon term: " + e.term);
        std::vector<std::string> forms{e.term};
        for (const auto& f : e.forms) {
            auto nf = normalize_for_matching(f);
            if (!nf.empty() && std::find(forms.begin(), forms.end(), nf) == forms.end()) forms.push_back(nf);
        }
        e.forms = std::move(forms);
    }
}

Lexicon Lexicon::parse(std::string_view content, std::string_view source) {
    std::vector<LexiconEntry> entries;
    size_t line_no = 0;
    for (auto& raw : text::split(content, '\n')) {
        ++line_no;
        auto line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
        auto cols = text::split(line, '\t');
        auto where = std::string(source) + ":" + std::to_string(line_no);
        if (cols.size() < 2 || cols.size() > 3) throw LexiconError(where + ": expected term<TAB>gender[<TAB>forms]");
        auto gender = parse_gender(text::trim(cols[1]));
        if (!gender) throw LexiconError(where + ": gender must be Male or Female");
        LexiconEntry e{text::trim(cols[0]), *gender, {}};
        if (cols.size() == 3)
            for (auto& f : text::split(cols[2], ','))
                if (auto t = text::trim(f); !t.empty()) e.forms.push_back(t);
        entries.push_back(std::move(e));
    }
    try {
        return Lexicon(std::move(entries));
    } catch (const LexiconError& e) {
        throw LexiconError(std::string(source) + ": " + e.what());
    }
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LexiconError("cannot read lexicon " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

StereotypeLexicon::StereotypeLexicon(Lexicon l) : Lexicon(std::move(l)) {
    if (empty()) throw LexiconError("stereotype lexicon is empty");
}

StereotypeLexicon StereotypeLexicon::load(const std::filesystem::path& path) {
    return StereotypeLexicon(Lexicon::load(path));
}

TopicLexicon TopicLexicon::load(const std::filesystem::path& path) { return TopicLexicon(Lexicon::load(path)); }

}  // namespace parlvote::bias
