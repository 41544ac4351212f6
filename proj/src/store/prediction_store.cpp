#include "parlvote/store/prediction_store.hpp"

#include "parlvote/llm/prompt.hpp"
#include "parlvote/util/csv.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>

namespace parlvote::store {

using nlohmann::json;

std::string utc_timestamp_now() {
    auto now = std::chrono::system_clock::now();
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

json to_json(const PredictionRecord& r) {
    json ctx = json::object();
    for (const auto& [a, v] : r.context.values) ctx[std::string(llm::to_string(a))] = v;
    json overridden = json::array();
    for (auto a : r.context.overridden) overridden.push_back(llm::to_string(a));
    return {
        {"record_id", r.record_id},
        {"task", llm::to_string(r.task)},
        {"speech_id", r.speech_id},
        {"mep_id", r.mep_id},
        {"roll_call_id", r.roll_call_id ? json(*r.roll_call_id) : json(nullptr)},
        {"model",
         {{"provider_id", r.model.provider_id}, {"model_name", r.model.model_name}, {"endpoint", r.model.endpoint}}},
        {"context_fingerprint", r.context_fingerprint},
        {"context", ctx},
        {"overridden", overridden},
        {"prediction",
         {{"label", llm::to_string(r.parsed.label)},
          {"confidence", r.parsed.confidence},
          {"reasoning", r.parsed.reasoning}}},
        {"ground_truth", llm::to_string(r.ground_truth)},
        {"correct", r.correct},
        {"speaker",
         {{"gender", to_string(r.speaker.gender)},
          {"group_id", r.speaker.group_id},
          {"country", r.speaker.country},
          {"age_bucket", to_string(r.speaker.age_bucket)}}},
        {"created_at", r.created_at},
    };
}

namespace {

[[noreturn]] void corrupt(const std::string& why) { throw StoreError(StoreError::Kind::StorageFailure, why); }

template <typename T>
T required(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) corrupt(std::string("record lacks field ") + key);
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        corrupt(std::string("record field has wrong type: ") + key);
    }
}

const json& required_object(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_object()) corrupt(std::string("record lacks object ") + key);
    return *it;
}

}  // namespace

PredictionRecord record_from_json(const json& j) {
    if (!j.is_object()) corrupt("record is not an object");
    PredictionRecord r;
    r.record_id = required<std::string>(j, "record_id");
    auto task = llm::parse_task(required<std::string>(j, "task"));
    if (!task) corrupt("unknown task");
    r.task = *task;
    r.speech_id = required<std::string>(j, "speech_id");
    r.mep_id = required<std::string>(j, "mep_id");
    if (auto it = j.find("roll_call_id"); it != j.end() && it->is_string()) r.roll_call_id = it->get<std::string>();
    const auto& model = required_object(j, "model");
    r.model.provider_id = required<std::string>(model, "provider_id");
    r.model.model_name = required<std::string>(model, "model_name");
    r.model.endpoint = model.value("endpoint", "");
    r.context_fingerprint = required<std::string>(j, "context_fingerprint");
    r.context.task = r.task;
    r.context.speech_id = r.speech_id;
    const auto& ctx = required_object(j, "context");
    for (auto it = ctx.begin(); it != ctx.end(); ++it) {
        auto a = llm::parse_attribute(it.key());
        if (!a || !it->is_string()) corrupt("bad context attribute " + it.key());
        r.context.values[*a] = it->get<std::string>();
    }
    for (const auto& name : required<std::vector<std::string>>(j, "overridden")) {
        auto a = llm::parse_attribute(name);
        if (!a) corrupt("bad overridden attribute " + name);
        r.context.overridden.push_back(*a);
    }
    const auto& pred = required_object(j, "prediction");
    auto label = llm::parse_label(required<std::string>(pred, "label"));
    if (!label) corrupt("bad prediction label");
    r.parsed.label = *label;
    r.parsed.confidence = required<int>(pred, "confidence");
    r.parsed.reasoning = required<std::string>(pred, "reasoning");
    auto truth = llm::parse_label(required<std::string>(j, "ground_truth"));
    if (!truth) corrupt("bad ground truth");
    r.ground_truth = *truth;
    r.correct = required<bool>(j, "correct");
    const auto& sp = required_object(j, "speaker");
    auto gender = parse_gender(required<std::string>(sp, "gender"));
    auto bucket = parse_age_bucket(required<std::string>(sp, "age_bucket"));
    if (!gender || !bucket) corrupt("bad speaker snapshot");
    r.speaker.gender = *gender;
    r.speaker.group_id = required<std::string>(sp, "group_id");
    r.speaker.country = required<std::string>(sp, "country");
    r.speaker.age_bucket = *bucket;
    r.created_at = required<std::string>(j, "created_at");

    if (r.correct != (r.parsed.label == r.ground_truth)) corrupt("record " + r.record_id + ": correct flag disagrees with labels");
    if (r.parsed.confidence < 1 || r.parsed.confidence > 5) corrupt("record " + r.record_id + ": confidence out of range");
    if ((r.task == TaskKind::VotePrediction) != r.roll_call_id.has_value())
        corrupt("record " + r.record_id + ": roll_call_id presence does not match task");
    return r;
}

bool RecordFilter::matches(const PredictionRecord& r) const {
    if (task && r.task != *task) return false;
    if (model && r.model.id() != *model) return false;
    if (correct && r.correct != *correct) return false;
    if (min_confidence && r.parsed.confidence < *min_confidence) return false;
    if (max_confidence && r.parsed.confidence > *max_confidence) return false;
    if (gender && r.speaker.gender != *gender) return false;
    if (group_id && r.speaker.group_id != *group_id) return false;
    if (country && r.speaker.country != *country) return false;
    if (age_bucket && r.speaker.age_bucket != *age_bucket) return false;
    if (speech_id && r.speech_id != *speech_id) return false;
    if (roll_call_id && r.roll_call_id != *roll_call_id) return false;
    if (context_fingerprint && r.context_fingerprint != *context_fingerprint) return false;
    return true;
}

std::string_view to_string(GroupBy g) {
    switch (g) {
        case GroupBy::Gender: return "gender";
        case GroupBy::PoliticalGroup: return "political_group";
        case GroupBy::Country: return "country";
        case GroupBy::AgeBucket: return "age";
        case GroupBy::Model: return "model";
    }
    return "?";
}

std::optional<GroupBy> parse_group_by(std::string_view s) {
    for (auto g : {GroupBy::Gender, GroupBy::PoliticalGroup, GroupBy::Country, GroupBy::AgeBucket, GroupBy::Model})
        if (s == to_string(g)) return g;
    return std::nullopt;
}

long MetricsTable::total() const {
    long t = 0;
    for (const auto& r : rows) t += r.n;
    return t;
}

void write_metrics_csv(std::ostream& out, const MetricsTable& table) {
    csv::write_row(out, {"group", "n", "n_correct", "accuracy"});
    for (const auto& r : table.rows)
        csv::write_row(out, {r.group, std::to_string(r.n), std::to_string(r.n_correct), csv::fixed(r.accuracy, 4)});
}

long GenderConfusion::row_total(Gender truth) const {
    auto t = static_cast<int>(truth);
    return counts[t][0] + counts[t][1];
}

long GenderConfusion::total() const { return row_total(Gender::Male) + row_total(Gender::Female); }

double GenderConfusion::female_as_male_rate() const {
    auto n = row_total(Gender::Female);
    return n ? static_cast<double>(cell(Gender::Female, Gender::Male)) / static_cast<double>(n) : 0.0;
}

double GenderConfusion::male_as_female_rate() const {
    auto n = row_total(Gender::Male);
    return n ? static_cast<double>(cell(Gender::Male, Gender::Female)) / static_cast<double>(n) : 0.0;
}

MetricsTable accuracy_breakdown(const std::vector<PredictionRecord>& records, GroupBy group_by) {
    // (order key, label) -> (n, n_correct)
    std::map<std::pair<int, std::string>, std::pair<long, long>> groups;
    for (const auto& r : records) {
        std::pair<int, std::string> key;
        switch (group_by) {
            case GroupBy::Gender: key = {0, std::string(to_string(r.speaker.gender))}; break;
            case GroupBy::PoliticalGroup: key = {0, r.speaker.group_id}; break;
            case GroupBy::Country: key = {0, r.speaker.country}; break;
            case GroupBy::AgeBucket:
                key = {static_cast<int>(r.speaker.age_bucket), std::string(to_string(r.speaker.age_bucket))};
                break;
            case GroupBy::Model: key = {0, r.model.id()}; break;
        }
        auto& [n, ok] = groups[key];
        ++n;
        if (r.correct) ++ok;
    }
    MetricsTable t;
    t.group_by = group_by;
    for (const auto& [key, v] : groups)
        t.rows.push_back({key.second, v.first, v.second, static_cast<double>(v.second) / static_cast<double>(v.first)});
    return t;
}

GenderConfusion misclassification_matrix(const std::vector<PredictionRecord>& records) {
    GenderConfusion m;
    for (const auto& r : records) {
        if (r.task != TaskKind::GenderPrediction) continue;
        int truth = r.ground_truth == Label::Male ? 0 : 1;
        int pred = r.parsed.label == Label::Male ? 0 : 1;
        ++m.counts[truth][pred];
    }
    return m;
}

PredictionStore::PredictionStore() : clock_(utc_timestamp_now) {}

PredictionStore::PredictionStore(const std::filesystem::path& path) : path_(path), clock_(utc_timestamp_now) {
    const bool exists = std::filesystem::exists(path);
    if (exists) {
        std::ifstream in(path, std::ios::binary);
        if (!in) corrupt("cannot read prediction log " + path.string());
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        size_t pos = 0;
        size_t line_no = 0;
        std::optional<size_t> truncate_at;
        while (pos < content.size()) {
            auto nl = content.find('\n', pos);
            const bool complete = nl != std::string::npos;
            std::string_view line(content.data() + pos, (complete ? nl : content.size()) - pos);
            ++line_no;
            auto doc = json::parse(line, nullptr, false);
            const bool last = !complete || nl + 1 >= content.size();
            if (!complete || doc.is_discarded()) {
                if (!last) corrupt(path.string() + ":" + std::to_string(line_no) + ": unreadable record");
                truncate_at = pos;  // torn tail
                break;
            }
            if (line_no == 1) {
                if (!doc.is_object() || doc.value("format", "") != kLogFormat || doc.value("version", 0) != kLogVersion)
                    corrupt(path.string() + ": not a version-1 prediction log");
            } else {
                auto rec = record_from_json(doc);
                if (by_id_.count(rec.record_id)) corrupt("duplicate record id " + rec.record_id);
                by_id_.emplace(rec.record_id, records_.size());
                records_.push_back(std::move(rec));
            }
            pos = nl + 1;
        }
        if (truncate_at) {
            in.close();
            std::filesystem::resize_file(path, *truncate_at);
        }
    } else if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    file_ = std::fopen(path.c_str(), "ab");
    if (!file_) corrupt("cannot open prediction log for append: " + path.string());
    if (!exists || std::filesystem::file_size(path) == 0) {
        json header = {{"format", kLogFormat}, {"version", kLogVersion}};
        append_line(header.dump());
    }
}

PredictionStore::~PredictionStore() {
    if (file_) std::fclose(file_);
}

void PredictionStore::set_clock(std::function<std::string()> clock) {
    std::unique_lock lock(mu_);
    clock_ = std::move(clock);
}

void PredictionStore::append_line(const std::string& line) {
    if (!file_) return;
    std::string buf = line + "\n";
    if (std::fwrite(buf.data(), 1, buf.size(), file_) != buf.size() || std::fflush(file_) != 0 ||
        ::fsync(::fileno(file_)) != 0)
        corrupt("write to prediction log failed");
}

const RollCall* default_roll_call(const Corpus& corpus, const Speech& speech) {
    for (const RollCall* rc : corpus.roll_calls_for_debate(speech.debate_id))
        if (rc->record_for(speech.mep_id)) return rc;
    return nullptr;
}

std::string PredictionStore::record(const PredictionRecord& draft, const Corpus& corpus) {
    const Speech* speech = corpus.find_speech(draft.speech_id);
    if (!speech) throw StoreError(StoreError::Kind::DanglingReference, "unknown speech " + draft.speech_id);
    if (!draft.mep_id.empty() && draft.mep_id != speech->mep_id)
        throw StoreError(StoreError::Kind::DanglingReference, "speech " + speech->id + " is not by " + draft.mep_id);
    const Mep* mep = corpus.find_mep(speech->mep_id);
    const Debate* debate = corpus.find_debate(speech->debate_id);
    if (!mep || !debate) throw StoreError(StoreError::Kind::DanglingReference, "speech " + speech->id + " is dangling");
    if (!llm::is_known_template_version(llm::fingerprint_template_version(draft.context_fingerprint)))
        throw StoreError(StoreError::Kind::InvalidRecord, "fingerprint has unknown template version");
    if (!llm::label_in_task(draft.parsed.label, draft.task))
        throw StoreError(StoreError::Kind::InvalidRecord, "predicted label outside the task's label set");
    if (draft.parsed.confidence < 1 || draft.parsed.confidence > 5)
        throw StoreError(StoreError::Kind::InvalidRecord, "confidence outside 1..5");

    PredictionRecord r = draft;
    r.mep_id = mep->id;
    r.context.task = r.task;
    r.context.speech_id = r.speech_id;
    Date age_date = debate->date;
    if (r.task == TaskKind::VotePrediction) {
        if (!r.roll_call_id) throw StoreError(StoreError::Kind::InvalidRecord, "vote-task record needs a roll call");
        const RollCall* rc = corpus.find_roll_call(*r.roll_call_id);
        if (!rc) throw StoreError(StoreError::Kind::DanglingReference, "unknown roll call " + *r.roll_call_id);
        if (rc->debate_id != speech->debate_id)
            throw StoreError(StoreError::Kind::InvalidRecord, rc->id + " does not conclude the speech's debate");
        const VoteRecord* vote = rc->record_for(mep->id);
        if (!vote) throw StoreError(StoreError::Kind::InvalidRecord, mep->id + " has no vote in " + rc->id);
        r.ground_truth = llm::to_label(vote->choice);
        age_date = rc->date;
    } else {
        if (r.roll_call_id) throw StoreError(StoreError::Kind::InvalidRecord, "gender-task record has a roll call");
        r.ground_truth = llm::to_label(mep->gender);
    }
    r.correct = r.parsed.label == r.ground_truth;
    r.speaker.gender = mep->gender;
    r.speaker.group_id = mep->group_id;
    r.speaker.country = mep->country;
    int age = age_in_years(mep->birth_date, age_date);
    r.speaker.age_bucket = age_bucket_for_age(age < 0 ? 0 : age);

    std::unique_lock lock(mu_);
    char id[32];
    std::snprintf(id, sizeof id, "rec-%08zu", records_.size() + 1);
    r.record_id = id;
    r.created_at = clock_();
    append_line(to_json(r).dump());
    by_id_.emplace(r.record_id, records_.size());
    records_.push_back(std::move(r));
    return id;
}

std::optional<PredictionRecord> PredictionStore::get(std::string_view record_id) const {
    std::shared_lock lock(mu_);
    auto it = by_id_.find(record_id);
    if (it == by_id_.end()) return std::nullopt;
    return records_[it->second];
}

std::vector<PredictionRecord> PredictionStore::query(const RecordFilter& filter) const {
    std::vector<PredictionRecord> out;
    {
        std::shared_lock lock(mu_);
        for (const auto& r : records_)
            if (filter.matches(r)) out.push_back(r);
    }
    std::stable_sort(out.begin(), out.end(), [](const PredictionRecord& a, const PredictionRecord& b) {
        return std::tie(a.created_at, a.record_id) < std::tie(b.created_at, b.record_id);
    });
    return out;
}

size_t PredictionStore::size() const {
    std::shared_lock lock(mu_);
    return records_.size();
}

MetricsTable PredictionStore::accuracy_breakdown(const RecordFilter& filter, GroupBy group_by) const {
    return store::accuracy_breakdown(query(filter), group_by);
}

GenderConfusion PredictionStore::misclassification_matrix(const RecordFilter& filter) const {
    RecordFilter f = filter;
    f.task = TaskKind::GenderPrediction;
    return store::misclassification_matrix(query(f));
}

}  // namespace parlvote::store
