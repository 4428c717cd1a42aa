#include "lexrag/evalkit.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "lexrag/error.hpp"
#include "lexrag/text.hpp"

namespace lexrag::evalkit {

RetrievalCounts count(const std::vector<std::string>& retrieved, const std::set<std::string>& relevant) {
    const std::set<std::string> got(retrieved.begin(), retrieved.end());
    RetrievalCounts c;
    for (const auto& id : got) {
        if (relevant.count(id)) {
            ++c.tp;
        } else {
            ++c.fp;
        }
    }
    c.fn = relevant.size() - c.tp;
    return c;
}

PrfScores prf_from_counts(const RetrievalCounts& c) {
    PrfScores s;
    if (c.tp + c.fp > 0) s.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) s.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    // 2PR/(P+R) over the counts, so the result is rounded once.
    if (c.tp > 0) s.f1 = static_cast<double>(2 * c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    return s;
}

PrfScores retrieval_prf(const std::vector<std::string>& retrieved, const std::set<std::string>& relevant) {
    if (relevant.empty()) throw Error(ErrorKind::EmptyRelevant, "relevant set is empty");
    return prf_from_counts(count(retrieved, relevant));
}

double answer_token_f1(std::string_view pred, std::string_view gold) {
    const auto tp = text::whitespace_tokens(pred);
    const auto tg = text::whitespace_tokens(gold);
    if (tp.empty() || tg.empty()) return 0.0;
    std::map<std::string, std::size_t> counts;
    for (auto t : tg) ++counts[text::ascii_lower(t)];
    std::size_t overlap = 0;
    for (auto t : tp) {
        auto it = counts.find(text::ascii_lower(t));
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double p = static_cast<double>(overlap) / static_cast<double>(tp.size());
    const double r = static_cast<double>(overlap) / static_cast<double>(tg.size());
    return 2.0 * p * r / (p + r);
}

std::vector<GoldItem> parse_gold(std::string_view jsonl) {
    std::vector<GoldItem> out;
    std::size_t line_no = 0;
    for (auto line : text::split_lines(jsonl)) {
        ++line_no;
        if (text::is_blank(line)) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            GoldItem item;
            item.question = j.at("question").get<std::string>();
            item.relevant = j.value("relevant", std::vector<std::string>{});
            if (j.contains("gold_answer") && j.at("gold_answer").is_string()) {
                item.gold_answer = j.at("gold_answer").get<std::string>();
            }
            out.push_back(std::move(item));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::InvalidConfig, "gold set line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<GoldItem> load_gold(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot read gold set " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_gold(ss.str());
}

std::set<std::string> resolve_relevant(const std::vector<std::string>& relevant, const store::VectorStore& s) {
    std::set<std::string> out;
    const auto records = s.records();
    for (const auto& entry : relevant) {
        if (s.get(entry)) {
            out.insert(entry);
            continue;
        }
        const std::string below = entry + " / ";
        for (const auto& r : records) {
            if (r.path == entry || r.path.starts_with(below)) out.insert(r.chunk_id);
        }
    }
    return out;
}

EvalReport run_eval(const std::vector<GoldItem>& gold, const rag::Index& index, const rag::EngineConfig& cfg,
                    std::size_t k) {
    if (gold.empty()) throw Error(ErrorKind::EmptyGoldSet, "gold set has no questions");
    if (index.store.empty()) throw Error(ErrorKind::EmptyIndex, "the index holds no chunks; ingest a document first");

    rag::EngineConfig run_cfg = cfg;
    run_cfg.k = k;

    EvalReport report;
    report.config = run_cfg.to_json();
    double answer_sum = 0.0;
    std::size_t answer_n = 0;
    for (const auto& item : gold) {
        const auto relevant = resolve_relevant(item.relevant, index.store);
        if (relevant.empty()) {
            ++report.skipped;
            report.skipped_questions.push_back(item.question);
            continue;
        }
        QuestionReport q;
        q.question = item.question;
        q.relevant.assign(relevant.begin(), relevant.end());
        for (const auto& hit : rag::retrieve(item.question, k, run_cfg.rerank, index, run_cfg)) {
            q.retrieved.push_back(hit.chunk_id);
        }
        q.scores = retrieval_prf(q.retrieved, relevant);
        if (item.gold_answer && run_cfg.backend == rag::Backend::stub) {
            const auto result = rag::answer(item.question, index, run_cfg);
            q.answer_f1 = answer_token_f1(result.answer, *item.gold_answer);
            answer_sum += *q.answer_f1;
            ++answer_n;
        }
        report.per_question.push_back(std::move(q));
    }
    if (report.per_question.empty()) {
        throw Error(ErrorKind::EmptyGoldSet, "every gold question has an empty relevant set");
    }
    const double n = static_cast<double>(report.per_question.size());
    for (const auto& q : report.per_question) {
        report.macro.precision += q.scores.precision;
        report.macro.recall += q.scores.recall;
        report.macro.f1 += q.scores.f1;
    }
    report.macro.precision /= n;
    report.macro.recall /= n;
    report.macro.f1 /= n;
    if (answer_n > 0) report.macro_answer_f1 = answer_sum / static_cast<double>(answer_n);
    return report;
}

nlohmann::json to_json(const PrfScores& s) {
    return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

namespace {

nlohmann::ordered_json ordered(const PrfScores& s) {
    nlohmann::ordered_json j;
    j["precision"] = s.precision;
    j["recall"] = s.recall;
    j["f1"] = s.f1;
    return j;
}

nlohmann::ordered_json ordered(const EvalReport& r) {
    nlohmann::ordered_json j;
    auto per = nlohmann::ordered_json::array();
    for (const auto& q : r.per_question) {
        nlohmann::ordered_json e;
        e["question"] = q.question;
        e["scores"] = ordered(q.scores);
        e["answer_f1"] = q.answer_f1 ? nlohmann::ordered_json(*q.answer_f1) : nlohmann::ordered_json(nullptr);
        e["retrieved"] = q.retrieved;
        e["relevant"] = q.relevant;
        per.push_back(std::move(e));
    }
    j["per_question"] = std::move(per);
    j["macro"] = ordered(r.macro);
    j["macro_answer_f1"] = r.macro_answer_f1 ? nlohmann::ordered_json(*r.macro_answer_f1) : nlohmann::ordered_json(nullptr);
    j["skipped"] = r.skipped;
    j["skipped_questions"] = r.skipped_questions;
    j["config"] = nlohmann::ordered_json::parse(r.config.dump());
    return j;
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) { return nlohmann::json::parse(ordered(r).dump()); }

std::string dump_report(const EvalReport& r) { return ordered(r).dump(2) + "\n"; }

void write_report(const EvalReport& r, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + file.string());
    out << dump_report(r);
    if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + file.string());
}

}  // namespace lexrag::evalkit
