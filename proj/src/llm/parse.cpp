#include "parlvote/llm/parse.hpp"

#include "parlvote/util/text.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace parlvote::llm {

namespace {

enum class Field { None, Label, Confidence, Reasoning };

struct Extracted {
    std::optional<std::string> label;
    std::optional<std::string> confidence;
    std::optional<long long> confidence_number;
    bool confidence_non_integer = false;
    std::optional<std::string> reasoning;
};

bool is_alpha(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

Field field_for_key(std::string_view key) {
    static constexpr std::string_view label_keys[] = {"label", "vote", "prediction", "predicted label",
                                                      "predicted vote", "predicted gender", "answer", "gender"};
    static constexpr std::string_view conf_keys[] = {"confidence", "confidence score", "confidence level"};
    static constexpr std::string_view reason_keys[] = {"reasoning", "reason", "explanation", "rationale",
                                                       "justification"};
    for (auto k : label_keys)
        if (key == k) return Field::Label;
    for (auto k : conf_keys)
        if (key == k) return Field::Confidence;
    for (auto k : reason_keys)
        if (key == k) return Field::Reasoning;
    return Field::None;
}

// Splits "**Label:** For" / "\"label\": \"For\"," / "- confidence = 4" into a
// recognised field and its raw value.
std::pair<Field, std::string_view> split_key(std::string_view line) {
    size_t i = 0;
    auto skip = [&](std::string_view set) {
        while (i < line.size() && set.find(line[i]) != std::string_view::npos) ++i;
    };
    skip(" \t*#->`\"'_");
    size_t key_start = i;
    while (i < line.size() && i - key_start < 24 &&
           (is_alpha(static_cast<unsigned char>(line[i])) || line[i] == ' ' || line[i] == '_'))
        ++i;
    auto key = text::to_lower(text::trim(line.substr(key_start, i - key_start)));
    for (auto& c : key)
        if (c == '_') c = ' ';
    skip("*\"'`_ \t");
    if (i >= line.size() || (line[i] != ':' && line[i] != '=')) return {Field::None, {}};
    return {field_for_key(key), line.substr(i + 1)};
}

std::string strip_chars(std::string_view v, std::string_view set) {
    size_t b = 0, e = v.size();
    while (b < e && set.find(v[b]) != std::string_view::npos) ++b;
    while (e > b && set.find(v[e - 1]) != std::string_view::npos) --e;
    return std::string(v.substr(b, e - b));
}

std::string clean_reasoning(std::string_view v) {
    auto s = text::trim(v);
    size_t b = 0;
    while (b < s.size() && (s[b] == '*' || s[b] == '_')) ++b;
    s = text::trim(std::string_view(s).substr(b));
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
        s = text::trim(std::string_view(s).substr(1, s.size() - 2));
    return s;
}

void extract_lines(std::string_view raw, Extracted& out) {
    auto lines = text::split(raw, '\n');
    for (size_t i = 0; i < lines.size(); ++i) {
        auto [field, value] = split_key(lines[i]);
        switch (field) {
            case Field::None: break;
            case Field::Label:
                // Skip echoed templates such as "label: <For|Against|Abstain>".
                if (!out.label && value.find('|') == std::string_view::npos &&
                    value.find('<') == std::string_view::npos)
                    out.label = std::string(value);
                break;
            case Field::Confidence:
                if (!out.confidence && value.find('<') == std::string_view::npos) out.confidence = std::string(value);
                break;
            case Field::Reasoning: {
                if (out.reasoning) break;
                std::string body(value);
                size_t j = i + 1;
                for (; j < lines.size(); ++j) {
                    if (split_key(lines[j]).first != Field::None) break;
                    body += '\n';
                    body += lines[j];
                }
                out.reasoning = clean_reasoning(body);
                i = j - 1;
                break;
            }
        }
    }
}

// Accepts the first JSON object embedded in the text when it carries a label.
bool extract_json(std::string_view raw, Extracted& out) {
    auto open = raw.find('{');
    auto close = raw.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return false;
    auto doc = nlohmann::json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (!doc.is_object()) return false;
    Extracted found;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        auto key = text::to_lower(it.key());
        for (auto& c : key)
            if (c == '_') c = ' ';
        const auto& v = it.value();
        switch (field_for_key(key)) {
            case Field::None: break;
            case Field::Label:
                if (v.is_string() && !found.label) found.label = v.get<std::string>();
                break;
            case Field::Confidence:
                if (found.confidence || found.confidence_number || found.confidence_non_integer) break;
                if (v.is_number_integer()) found.confidence_number = v.get<long long>();
                else if (v.is_number_unsigned()) found.confidence_number = static_cast<long long>(std::min<unsigned long long>(v.get<unsigned long long>(), 1000));
                else if (v.is_number_float()) found.confidence_non_integer = true;
                else if (v.is_string()) found.confidence = v.get<std::string>();
                break;
            case Field::Reasoning:
                if (v.is_string() && !found.reasoning) found.reasoning = text::trim(v.get<std::string>());
                break;
        }
    }
    if (!found.label) return false;
    out = std::move(found);
    return true;
}

ParseFailure fail(GatewayError::Kind kind, std::string msg) { return ParseFailure{kind, std::move(msg)}; }

}  // namespace

std::variant<ParsedPrediction, ParseFailure> try_parse_prediction(std::string_view raw, TaskKind task) {
    Extracted ex;
    if (!extract_json(raw, ex)) extract_lines(raw, ex);

    if (!ex.label) return fail(GatewayError::Kind::UnparseableOutput, "no label found");
    auto cleaned = strip_chars(*ex.label, " \t\r*\"'`_<>[](){}.,;:!");
    size_t n = 0;
    while (n < cleaned.size() && is_alpha(static_cast<unsigned char>(cleaned[n]))) ++n;
    auto label = parse_label(std::string_view(cleaned).substr(0, n));
    if (!label) return fail(GatewayError::Kind::UnparseableOutput, "unrecognised label");
    if (!label_in_task(*label, task))
        return fail(GatewayError::Kind::WrongLabelSet,
                    std::string(to_string(*label)) + " is not a " + std::string(to_string(task)) + "-task label");

    long long confidence = 0;
    if (ex.confidence_non_integer) return fail(GatewayError::Kind::UnparseableOutput, "confidence is not an integer");
    if (ex.confidence_number) {
        confidence = *ex.confidence_number;
    } else {
        if (!ex.confidence) return fail(GatewayError::Kind::UnparseableOutput, "no confidence found");
        auto c = strip_chars(*ex.confidence, " \t\r*\"'`_");
        size_t d = 0;
        bool negative = false;
        if (!c.empty() && c[0] == '-') {
            negative = true;
            d = 1;
        }
        size_t digits_start = d;
        while (d < c.size() && is_digit(static_cast<unsigned char>(c[d]))) ++d;
        size_t ndigits = d - digits_start;
        if (ndigits == 0) return fail(GatewayError::Kind::UnparseableOutput, "confidence is not a number");
        if (d + 1 < c.size() && (c[d] == '.' || c[d] == ',') && is_digit(static_cast<unsigned char>(c[d + 1])))
            return fail(GatewayError::Kind::UnparseableOutput, "confidence is not an integer");
        if (ndigits > 3) return fail(GatewayError::Kind::OutOfRangeConfidence, "confidence out of range");
        confidence = std::stoll(c.substr(digits_start, ndigits));
        if (negative) confidence = -confidence;
    }
    if (confidence < 1 || confidence > 5)
        return fail(GatewayError::Kind::OutOfRangeConfidence,
                    "confidence " + std::to_string(confidence) + " outside 1..5");

    if (!ex.reasoning || ex.reasoning->empty()) return fail(GatewayError::Kind::UnparseableOutput, "no reasoning found");
    return ParsedPrediction{*label, static_cast<int>(confidence), *ex.reasoning};
}

ParsedPrediction parse_prediction(const RawResponse& raw, TaskKind task) {
    auto r = try_parse_prediction(raw.text, task);
    if (auto* f = std::get_if<ParseFailure>(&r)) throw GatewayError(f->kind, f->message);
    return std::get<ParsedPrediction>(std::move(r));
}

std::string format_answer(const ParsedPrediction& p) {
    return "label: " + std::string(to_string(p.label)) + "\nconfidence: " + std::to_string(p.confidence) +
           "\nreasoning: " + p.reasoning;
}

}  // namespace parlvote::llm
