#include "parlvote/batch.hpp"

#include "parlvote/util/csv.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <random>
#include <set>
#include <tuple>

namespace parlvote::batch {

long SweepSummary::recorded() const {
    long n = 0;
    for (const auto& m : models) n += m.recorded;
    return n;
}

long SweepSummary::failed() const {
    long n = 0;
    for (const auto& m : models) n += m.failed;
    return n;
}

long SweepSummary::skipped() const {
    long n = 0;
    for (const auto& m : models) n += m.skipped;
    return n;
}

std::vector<std::string> eligible_speeches(const Corpus& corpus, llm::TaskKind task) {
    std::vector<std::string> out;
    for (const auto& [id, s] : corpus.speeches)
        if (task == llm::TaskKind::GenderPrediction || store::default_roll_call(corpus, s)) out.push_back(id);
    return out;
}

std::vector<std::string> select_speeches(const Corpus& corpus, const SweepOptions& options) {
    auto ids = eligible_speeches(corpus, options.task);
    if (!options.limit || *options.limit >= ids.size()) return ids;
    if (options.seed) {
        // Fisher-Yates over the id-ordered list; mt19937_64 output is fixed by the standard.
        std::mt19937_64 rng(*options.seed);
        for (size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng() % (i + 1)]);
        ids.resize(*options.limit);
        std::sort(ids.begin(), ids.end());
    } else {
        ids.resize(*options.limit);
    }
    return ids;
}

namespace {

struct SpeechJob {
    std::string speech_id;
    std::vector<llm::ModelSpec> models;  // pending ones only
    llm::Prompt prompt;
    llm::ResolvedContext context;
    std::optional<std::string> roll_call_id;
    std::vector<llm::ModelOutcome> outcomes;
};

}  // namespace

SweepSummary run_sweep(const Corpus& corpus, store::PredictionStore& store, const llm::Gateway& gateway,
                       const SweepOptions& options, const SweepLog& log) {
    options.context.validate(options.task);
    options.params.validate();
    auto say = [&](const std::string& line) {
        if (log) log(line);
    };

    std::vector<llm::ModelSpec> specs;
    for (const auto& id : options.models) specs.push_back(gateway.registry().resolve(id));
    std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
    specs.erase(std::unique(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.id() == b.id(); }),
                specs.end());

    SweepSummary summary;
    std::map<std::string, size_t> tally_index;
    for (const auto& s : specs) {
        tally_index[s.id()] = summary.models.size();
        summary.models.push_back({s.id()});
    }

    std::set<std::tuple<std::string, std::string, std::string>> done;
    if (!options.rerun) {
        store::RecordFilter f;
        f.task = options.task;
        for (const auto& r : store.query(f)) done.emplace(r.speech_id, r.model.id(), r.context_fingerprint);
    }

    auto speeches = select_speeches(corpus, options);
    size_t width = std::max<size_t>(1, options.speeches_in_flight);
    for (size_t begin = 0; begin < speeches.size(); begin += width) {
        size_t end = std::min(speeches.size(), begin + width);
        std::vector<SpeechJob> jobs;
        for (size_t i = begin; i < end; ++i) {
            SpeechJob job;
            job.speech_id = speeches[i];
            job.prompt = llm::prepare_prompt(corpus, job.speech_id, options.task, options.context, &job.context);
            if (options.task == llm::TaskKind::VotePrediction)
                job.roll_call_id = store::default_roll_call(corpus, *corpus.find_speech(job.speech_id))->id;
            for (const auto& s : specs) {
                if (done.count({job.speech_id, s.id(), job.prompt.context_fingerprint})) {
                    ++summary.models[tally_index[s.id()]].skipped;
                    continue;
                }
                job.models.push_back(s);
            }
            jobs.push_back(std::move(job));
        }

        std::vector<std::future<std::vector<llm::ModelOutcome>>> running;
        for (auto& job : jobs)
            running.push_back(std::async(std::launch::async, [&gateway, &job, &options] {
                if (job.models.empty()) return std::vector<llm::ModelOutcome>{};
                return gateway.compare_models(job.models, job.prompt, options.params);
            }));
        for (size_t j = 0; j < jobs.size(); ++j) jobs[j].outcomes = running[j].get();

        for (auto& job : jobs) {
            for (const auto& o : job.outcomes) {
                auto& tally = summary.models[tally_index[o.model.id()]];
                if (!o.ok()) {
                    const auto& f = std::get<llm::ModelFailure>(o.result);
                    ++tally.failed;
                    say("speech " + job.speech_id + " model " + o.model.id() + ": " + std::string(to_string(f.kind)) +
                        ": " + f.message);
                    continue;
                }
                store::PredictionRecord draft;
                draft.task = options.task;
                draft.speech_id = job.speech_id;
                draft.roll_call_id = job.roll_call_id;
                draft.model = o.model;
                draft.context_fingerprint = job.prompt.context_fingerprint;
                draft.context = job.context;
                draft.parsed = std::get<llm::ParsedPrediction>(o.result);
                auto id = store.record(draft, corpus);
                ++tally.recorded;
                if (store.get(id)->correct) ++tally.correct;
            }
        }
    }
    return summary;
}

namespace {

std::ofstream open_report(const std::filesystem::path& dir, std::string_view name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
}

}  // namespace

std::vector<std::string> write_reports(const store::PredictionStore& store, const bias::StereotypeLexicon& stereotypes,
                                       const bias::TopicLexicon& topics, const bias::FailureRuleset& rules,
                                       const std::filesystem::path& dir, const ReportOptions& options) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    auto emit = [&](std::string_view name, const auto& write) {
        auto out = open_report(dir, name);
        write(out);
        out.flush();
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        written.emplace_back(name);
    };

    auto gender_errors = bias::high_confidence_errors(store, llm::TaskKind::GenderPrediction, options.threshold);
    auto vote_errors = bias::high_confidence_errors(store, llm::TaskKind::VotePrediction, options.threshold);

    emit(kStereotypeTermsCsv, [&](std::ostream& o) {
        bias::write_term_table_csv(o, bias::count_stereotype_terms(gender_errors, stereotypes, options.counting));
    });
    emit(kTopicGenderCsv, [&](std::ostream& o) {
        bias::write_topic_table_csv(o, bias::topic_gender_association(gender_errors, topics, options.counting));
    });
    auto dist = bias::failure_distribution(vote_errors, rules);
    emit(kFailureCategoriesCsv, [&](std::ostream& o) { bias::write_failure_chart_csv(o, dist); });
    emit(kFailureSummaryCsv, [&](std::ostream& o) { bias::write_failure_summary_csv(o, dist); });

    for (auto task : {llm::TaskKind::VotePrediction, llm::TaskKind::GenderPrediction}) {
        store::RecordFilter f;
        f.task = task;
        for (auto g : {store::GroupBy::Gender, store::GroupBy::PoliticalGroup, store::GroupBy::Country,
                       store::GroupBy::AgeBucket, store::GroupBy::Model}) {
            auto name = "accuracy_" + std::string(to_string(task)) + "_by_" + std::string(to_string(g)) + ".csv";
            emit(name, [&](std::ostream& o) { store::write_metrics_csv(o, store.accuracy_breakdown(f, g)); });
        }
    }

    emit(kGenderConfusionCsv, [&](std::ostream& o) {
        auto m = store.misclassification_matrix({});
        csv::write_row(o, {"truth", "predicted", "count"});
        for (auto t : {Gender::Male, Gender::Female})
            for (auto p : {Gender::Male, Gender::Female})
                csv::write_row(o, {std::string(to_string(t)), std::string(to_string(p)), std::to_string(m.cell(t, p))});
    });
    return written;
}

}  // namespace parlvote::batch
