#include "lexrag/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>

#include "CLI11.hpp"
#include "lexrag/config.hpp"
#include "lexrag/error.hpp"
#include "lexrag/evalkit.hpp"
#include "lexrag/http_client.hpp"
#include "lexrag/ingest.hpp"
#include "lexrag/pipeline.hpp"
#include "lexrag/rag.hpp"
#include "lexrag/server.hpp"

namespace lexrag::cli {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fixed(double v, int places = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

std::string snippet(const std::string& s, std::size_t max_bytes = 80) {
    std::string out;
    for (char c : s) out += (c == '\n' || c == '\t') ? ' ' : c;
    if (out.size() <= max_bytes) return out;
    std::size_t cut = max_bytes;
    while (cut > 0 && (static_cast<unsigned char>(out[cut]) & 0xC0) == 0x80) --cut;
    return out.substr(0, cut) + "...";
}

/// Values given on the command line; unset ones leave the config alone.
struct Flags {
    std::string config_file;
    std::string index_dir;
    bool json = false;

    std::optional<std::size_t> max_tokens, overlap, k, epochs, batch, max_new_tokens, dim;
    std::optional<double> lr, temperature;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend, bind_addr, static_dir, gen_url;
    bool rerank = false;

    std::string input;  // path, question or data file
    std::string report_file;
};

AppConfig resolve(const Flags& f, bool needs_index) {
    AppConfig cfg = f.config_file.empty() ? AppConfig{} : AppConfig::load(f.config_file);
    if (!f.index_dir.empty()) cfg.index_dir = f.index_dir;
    if (f.max_tokens) cfg.chunk.max_tokens = *f.max_tokens;
    if (f.overlap) cfg.chunk.overlap_tokens = *f.overlap;
    if (f.k) cfg.engine.k = *f.k;
    if (f.dim) cfg.engine.embedder.dim = *f.dim;
    if (f.rerank) cfg.engine.rerank = true;
    if (f.backend) cfg.engine.backend = rag::backend_from_string(*f.backend);
    if (f.max_new_tokens) cfg.engine.gen.max_new_tokens = *f.max_new_tokens;
    if (f.temperature) cfg.engine.gen.temperature = *f.temperature;
    if (f.gen_url) cfg.engine.gen_base_url = *f.gen_url;
    if (f.epochs) cfg.train.epochs = *f.epochs;
    if (f.lr) cfg.train.learning_rate = *f.lr;
    if (f.batch) cfg.train.batch_size = *f.batch;
    if (f.seed) cfg.train.seed = *f.seed;
    if (f.bind_addr) cfg.bind_addr = *f.bind_addr;
    if (f.static_dir) cfg.static_dir = *f.static_dir;
    cfg.finalize();
    if (needs_index && cfg.index_dir.empty()) {
        throw UsageError("an index directory is required (--index or server.index_dir in the config file)");
    }
    return cfg;
}

void print_table(const std::vector<store::ScoredChunk>& hits, std::ostream& out) {
    std::size_t rank = 0;
    for (const auto& h : hits) {
        out << ++rank << ". [" << (h.path.empty() ? h.doc_id : h.path) << "] " << h.chunk_id
            << "  cosine=" << fixed(h.cosine_score, 4);
        if (h.rerank_score) out << "  rerank=" << fixed(*h.rerank_score, 4);
        out << "\n   " << snippet(h.text) << "\n";
    }
    if (hits.empty()) out << "(no results)\n";
}

int cmd_ingest(const Flags& f, std::ostream& out, std::ostream& err) {
    const auto cfg = resolve(f, true);
    const auto report = pipeline::ingest_into_index(f.input, cfg.index_dir, cfg);
    for (const auto& w : report.warnings) err << "warning: " << w << "\n";
    if (f.json) {
        out << report.to_json().dump(2) << "\n";
    } else {
        out << "doc_id: " << report.doc_id << "\npages: " << report.pages << "\nchunks: " << report.chunks << "\n";
    }
    return kExitOk;
}

int cmd_query(const Flags& f, std::ostream& out) {
    const auto cfg = resolve(f, true);
    const auto index = rag::Index::open(cfg.index_dir);
    const auto hits = rag::retrieve(f.input, cfg.engine.k, cfg.engine.rerank, index, cfg.engine);
    if (f.json) {
        nlohmann::json results = nlohmann::json::array();
        for (const auto& h : hits) results.push_back(store::to_json(h));
        out << nlohmann::json{{"results", results}}.dump(2) << "\n";
    } else {
        print_table(hits, out);
    }
    return kExitOk;
}

int cmd_answer(const Flags& f, std::ostream& out, std::ostream& err) {
    const auto cfg = resolve(f, true);
    const auto index = rag::Index::open(cfg.index_dir);
    const auto result = rag::answer(f.input, index, cfg.engine);
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    if (f.json) {
        out << rag::to_json(result).dump(2) << "\n";
        return kExitOk;
    }
    out << result.answer << "\n\nCitations:\n";
    for (const auto& c : result.citations) out << "  [" << c.path << "] " << c.chunk_id << "\n";
    return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out) {
    const auto cfg = resolve(f, true);
    const auto index = rag::Index::open(cfg.index_dir);
    const auto examples = pipeline::load_training_set(f.input, index, cfg.engine);
    const auto result = rerank::train_reranker(examples, cfg.train);
    const auto file = cfg.index_dir / rag::kRerankerFile;
    result.model.save(file);
    if (f.json) {
        out << nlohmann::json{{"model", result.model.to_json()},
                              {"final_loss", result.loss_history.back()},
                              {"examples", examples.size()}}
                   .dump(2)
            << "\n";
    } else {
        out << "examples: " << examples.size() << "\nepochs: " << result.loss_history.size()
            << "\nfinal loss: " << fixed(result.loss_history.back(), 6) << "\nwrote " << file.string() << "\n";
    }
    return kExitOk;
}

int cmd_eval(const Flags& f, std::ostream& out) {
    const auto cfg = resolve(f, true);
    const auto index = rag::Index::open(cfg.index_dir);
    const auto gold = evalkit::load_gold(f.input);
    const auto report = evalkit::run_eval(gold, index, cfg.engine, cfg.engine.k);
    const std::filesystem::path file = f.report_file.empty() ? std::string("eval_report.json") : f.report_file;
    evalkit::write_report(report, file);
    if (f.json) {
        out << evalkit::dump_report(report);
        return kExitOk;
    }
    out << "questions: " << report.per_question.size() << " (skipped " << report.skipped << ")\n"
        << "macro precision = " << fixed(report.macro.precision) << "\n"
        << "macro recall = " << fixed(report.macro.recall) << "\n"
        << "macro F1 = " << fixed(report.macro.f1) << "\n";
    if (report.macro_answer_f1) out << "answer F1 = " << fixed(*report.macro_answer_f1) << "\n";
    out << "wrote " << file.string() << "\n";
    return kExitOk;
}

int cmd_clean(const Flags& f, std::ostream& out) {
    const auto cfg = resolve(f, false);
    const auto doc = ingest::clean_document(ingest::load_document(f.input), cfg.grammar);
    out << ingest::to_json(doc).dump(2) << "\n";
    return kExitOk;
}

int cmd_serve(const Flags& f) {
    const auto cfg = resolve(f, true);
    server::serve(cfg, http::env_or_empty("LEXRAG_API_TOKEN"));
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"lexrag: retrieval-augmented question answering over legal documents"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    app.add_option("--config", f.config_file, "config.json to load before applying flags");
    app.add_option("--index", f.index_dir, "index directory");
    app.add_flag("--json", f.json, "machine-readable output");

    auto* ingest_cmd = app.add_subcommand("ingest", "extract, clean, chunk, embed and index a PDF or text file");
    ingest_cmd->add_option("path", f.input, "PDF or UTF-8 text file")->required();
    ingest_cmd->add_option("--max-tokens", f.max_tokens, "chunk window size");
    ingest_cmd->add_option("--overlap", f.overlap, "tokens shared by consecutive chunks");
    ingest_cmd->add_option("--dim", f.dim, "embedding dimension for a new index");

    auto* query_cmd = app.add_subcommand("query", "retrieve the top-k chunks for a question");
    query_cmd->add_option("question", f.input)->required();
    query_cmd->add_option("-k", f.k, "number of results");
    query_cmd->add_flag("--rerank", f.rerank, "re-rank a wider candidate pool");

    auto* answer_cmd = app.add_subcommand("answer", "answer a question with citations");
    answer_cmd->add_option("question", f.input)->required();
    answer_cmd->add_option("-k", f.k, "number of retrieved chunks");
    answer_cmd->add_flag("--rerank", f.rerank, "re-rank a wider candidate pool");
    answer_cmd->add_option("--backend", f.backend, "stub or remote")->check(CLI::IsMember({"stub", "remote"}));
    answer_cmd->add_option("--max-new-tokens", f.max_new_tokens, "remote generation length");
    answer_cmd->add_option("--temperature", f.temperature, "remote sampling temperature");
    answer_cmd->add_option("--gen-url", f.gen_url, "remote generation base URL");

    auto* train_cmd = app.add_subcommand("train-rerank", "fit the logistic re-ranker and store it in the index");
    train_cmd->add_option("train_file", f.input, "JSONL training pairs")->required();
    train_cmd->add_option("--epochs", f.epochs);
    train_cmd->add_option("--lr", f.lr, "learning rate");
    train_cmd->add_option("--batch", f.batch, "mini-batch size");
    train_cmd->add_option("--seed", f.seed);

    auto* eval_cmd = app.add_subcommand("eval", "score retrieval against a gold set");
    eval_cmd->add_option("gold_file", f.input, "JSONL gold set")->required();
    eval_cmd->add_option("-k", f.k, "retrieval depth");
    eval_cmd->add_flag("--rerank", f.rerank, "re-rank a wider candidate pool");
    eval_cmd->add_option("--report", f.report_file, "report path (default eval_report.json)");

    auto* serve_cmd = app.add_subcommand("serve", "run the REST API");
    serve_cmd->add_option("--bind", f.bind_addr, "host:port");
    serve_cmd->add_option("--static-dir", f.static_dir, "UI bundle to serve at /");

    auto* clean_cmd = app.add_subcommand("clean", "print the cleaned text and structure tree as JSON");
    clean_cmd->add_option("path", f.input, "PDF or UTF-8 text file")->required();

    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*ingest_cmd) return cmd_ingest(f, out, err);
        if (*query_cmd) return cmd_query(f, out);
        if (*answer_cmd) return cmd_answer(f, out, err);
        if (*train_cmd) return cmd_train(f, out);
        if (*eval_cmd) return cmd_eval(f, out);
        if (*serve_cmd) return cmd_serve(f);
        if (*clean_cmd) return cmd_clean(f, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace lexrag::cli
