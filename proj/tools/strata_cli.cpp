#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "strata/config.hpp"
#include "strata/errors.hpp"
#include "strata/eval.hpp"
#include "strata/text.hpp"

using namespace strata;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) {
    g_stop.store(true);
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Toolset toolset_arg(const std::string& spec) {
    if (spec == "local") return tools::local_toolset();
    if (spec == "web") return tools::web_toolset();
    if (spec == "planner") return tools::planner_toolset();
    Toolset out;
    std::string item;
    std::istringstream ss(spec);
    while (std::getline(ss, item, ',')) {
        std::string t(text::trim(item));
        if (!t.empty()) out.insert(t);
    }
    if (out.empty()) throw ConfigError("empty toolset");
    return out;
}

std::shared_ptr<const EmbeddingProvider> embedder_for(const std::string& config_path, bool mock) {
    if (config_path.empty()) return std::make_shared<HashedEmbedder>();
    return make_embedder(load_config(config_path, mock));
}

struct Options {
    std::string config;
    bool mock = false;
};

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string corpus;
    std::string store;
    int chunk_tokens = 0;
    std::string extractor = "rule";
    bool force = false;
};

std::unique_ptr<TripleExtractor> make_extractor(const std::string& kind, const Options& o,
                                                std::shared_ptr<GenerationClient>& client) {
    if (kind == "rule") return std::make_unique<RuleBasedExtractor>();
    if (kind != "llm") throw ConfigError("--extractor must be rule or llm");
    if (o.config.empty()) throw ConfigError("--extractor llm needs --config for the generation endpoint");
    client = make_generation_client(load_config(o.config, o.mock), "extractor");
    return std::make_unique<LlmTripleExtractor>(*client);
}

void print_store_summary(const LocalStore& store, const std::filesystem::path& dir) {
    std::cout << "store: " << dir.string() << "\n"
              << "chunks: " << store.corpus().size() << "\n"
              << "triples: " << store.graph().triples().size() << "\n"
              << "entities: " << store.graph().entities().size() << "\n";
}

int cmd_ingest(const IngestArgs& a, const Options& o) {
    std::filesystem::path store_dir = a.store;
    int chunk_tokens = a.chunk_tokens;
    if (!o.config.empty()) {
        EngineConfig cfg = load_config(o.config, o.mock);
        if (store_dir.empty()) store_dir = cfg.store_path;
        if (chunk_tokens == 0) chunk_tokens = cfg.chunk_tokens;
    }
    if (store_dir.empty()) throw ConfigError("no store path: pass --store or --config");
    if (chunk_tokens == 0) chunk_tokens = 128;
    if (std::filesystem::exists(store_dir) && !std::filesystem::is_empty(store_dir) && !a.force) {
        std::cerr << "refusing to overwrite existing store " << store_dir.string() << " (use --force)\n";
        return 1;
    }
    auto embedder = embedder_for(o.config, o.mock);
    std::shared_ptr<GenerationClient> client;
    auto extractor = make_extractor(a.extractor, o, client);
    ChunkCorpus corpus = ingest_chunks(read_documents_jsonl(a.corpus), chunk_tokens, embedder);
    KnowledgeGraph graph = build_graph(corpus, *extractor);
    LocalStore store(std::move(corpus), std::move(graph));
    if (std::filesystem::exists(store_dir)) std::filesystem::remove_all(store_dir);
    store.persist(store_dir);
    print_store_summary(store, store_dir);
    return 0;
}

int cmd_build_graph(const std::string& store_arg, const std::string& extractor_kind, const Options& o) {
    std::filesystem::path store_dir = store_arg;
    if (store_dir.empty() && !o.config.empty()) store_dir = load_config(o.config, o.mock).store_path;
    if (store_dir.empty()) throw ConfigError("no store path: pass --store or --config");
    auto embedder = o.config.empty() ? nullptr : embedder_for(o.config, o.mock);
    LocalStore old = LocalStore::load(store_dir, embedder);
    std::shared_ptr<GenerationClient> client;
    auto extractor = make_extractor(extractor_kind, o, client);
    KnowledgeGraph graph = build_graph(old.corpus(), *extractor);
    LocalStore store(old.corpus(), std::move(graph), old.options());
    store.persist(store_dir);
    print_store_summary(store, store_dir);
    return 0;
}

// ---------------------------------------------------------------------------

std::size_t trace_reasoning_tokens(const PlannerTrace& trace) {
    std::size_t n = reasoning_tokens(trace.planner);
    for (const auto& c : trace.children) n += reasoning_tokens(c.trajectory);
    return n;
}

int cmd_ask(const std::string& question, const std::string& trace_path, const Options& o) {
    if (o.config.empty()) throw ConfigError("ask needs --config");
    Engine engine = build_engine(load_config(o.config, o.mock));
    PlannerAnswer result;
    try {
        result = engine.planner->answer(question);
    } catch (const PlannerAborted& e) {
        if (!trace_path.empty()) save_trace(e.trace, trace_path);
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    if (!trace_path.empty()) save_trace(result.trace, trace_path);
    const SearchCounts c = count_searches(result.trace);
    std::cout << (result.answer ? *result.answer : std::string("NO ANSWER")) << "\n";
    std::cout << "searches: local=" << c.local << " web=" << c.web << " browse=" << c.browse << "\n";
    return result.answer ? 0 : 2;
}

int cmd_bench(const std::string& dataset_path, const std::string& out_dir, int concurrency, const Options& o) {
    if (o.config.empty()) throw ConfigError("bench needs --config");
    DatasetLoad ds = load_dataset(dataset_path);
    for (const auto& r : ds.rejected) std::cerr << "rejected " << r << "\n";
    if (ds.samples.empty()) throw Error("dataset has no usable samples: " + dataset_path);
    Engine engine = build_engine(load_config(o.config, o.mock));

    std::filesystem::create_directories(out_dir);
    BenchmarkOptions opts;
    opts.concurrency = concurrency;
    opts.records_path = std::filesystem::path(out_dir) / "records.jsonl";
    opts.stop = &g_stop;
    std::signal(SIGINT, on_sigint);

    Pipeline pipeline = [&](const Sample& s) {
        PlannerAnswer a = engine.planner->answer(s.question);
        return PipelineResult{a.answer, count_searches(a.trace), trace_reasoning_tokens(a.trace)};
    };
    MetricsReport report = run_benchmark(ds.samples, pipeline, opts);
    std::signal(SIGINT, SIG_DFL);

    std::ofstream(std::filesystem::path(out_dir) / "metrics.json") << to_json(report).dump(2) << "\n";
    std::cout << "samples  EM        F1        local    web      browse\n";
    std::cout << report.per_sample.size() << "        " << fixed(report.em_mean, 4) << "    " << fixed(report.f1_mean, 4)
              << "    " << fixed(report.avg_local_searches, 2) << "     " << fixed(report.avg_web_searches, 2) << "     "
              << fixed(report.avg_browses, 2) << "\n";
    if (report.interrupted) {
        std::cerr << "interrupted: partial records written to " << opts.records_path->string() << "\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_score(const std::string& file, const std::vector<std::string>& golds, const std::string& toolset_spec,
              bool strict) {
    const Toolset toolset = toolset_arg(toolset_spec);
    const std::string text = read_file(file);
    ParsedTrajectory t;
    try {
        t = parse(text, toolset);
    } catch (const MalformedTrajectory& e) {
        std::cerr << "malformed trajectory: " << e.what() << "\n";
        return 1;
    }
    RewardReport r = compute_reward(t, golds, strict ? FormatMode::Strict : FormatMode::Lenient);
    std::cout << "format: " << (r.format.valid ? "valid" : "invalid") << "\n";
    for (const auto& v : r.format.violations) std::cout << "violation: " << v << "\n";
    std::cout << "prediction: " << r.prediction << "\n"
              << "tools: " << r.format.tool_types_used.size() << "/" << r.format.toolset_size << "\n"
              << "em: " << r.em << "\n"
              << "f1: " << fixed(r.f1) << "\n"
              << "reward: " << fixed(r.reward) << "\n";
    return 0;
}

struct RefineArgs {
    std::string file;
    std::string toolset = "local";
    double alpha = -1;
    double beta = -1;
    int min_per_round = -1;
    std::string other_conclusion;
};

int cmd_refine(const RefineArgs& a, const Options& o) {
    RefinerConfig rc;
    if (!o.config.empty()) rc = load_config(o.config, o.mock).refiner;
    if (a.alpha >= 0) rc.alpha = a.alpha;
    if (a.beta >= 0) rc.beta = a.beta;
    if (a.min_per_round >= 0) rc.min_per_round = a.min_per_round;
    rc.validate();

    const Toolset toolset = toolset_arg(a.toolset);
    ParsedTrajectory t;
    try {
        t = parse(read_file(a.file), toolset);
    } catch (const MalformedTrajectory& e) {
        std::cerr << "malformed trajectory: " << e.what() << "\n";
        return 1;
    }
    auto embedder = embedder_for(o.config, o.mock);
    std::optional<std::string> other;
    if (!a.other_conclusion.empty()) other = a.other_conclusion;
    const AgentSide side = a.toolset == "web" ? AgentSide::Web : AgentSide::Local;
    try {
        std::cout << format_refined(refine(t, other, rc, *embedder, side)) << "\n";
    } catch (const NoEvidence&) {
        std::cout << kNoEvidenceSentinel << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"strata: hierarchical multi-source deep search"};
    app.require_subcommand(1);
    Options opts;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "engine config (JSON)");
        sub->add_flag("--mock", opts.mock, "replace generation, embeddings and web with fixtures");
    };

    IngestArgs ingest;
    auto* s_ingest = app.add_subcommand("ingest", "chunk, extract and index a document corpus");
    add_common(s_ingest);
    s_ingest->add_option("corpus", ingest.corpus, "documents JSONL {doc_id, text}")->required();
    s_ingest->add_option("--store", ingest.store, "output store directory");
    s_ingest->add_option("--chunk-tokens", ingest.chunk_tokens, "max tokens per chunk");
    s_ingest->add_option("--extractor", ingest.extractor, "rule or llm")->capture_default_str();
    s_ingest->add_flag("--force", ingest.force, "overwrite an existing store");

    std::string graph_store, graph_extractor = "rule";
    auto* s_graph = app.add_subcommand("build-graph", "rebuild the knowledge graph of a store");
    add_common(s_graph);
    s_graph->add_option("--store", graph_store, "store directory");
    s_graph->add_option("--extractor", graph_extractor, "rule or llm")->capture_default_str();

    std::string question, trace_path;
    auto* s_ask = app.add_subcommand("ask", "answer a question");
    add_common(s_ask);
    s_ask->add_option("question", question)->required();
    s_ask->add_option("--trace", trace_path, "write the planner trace (JSONL) here");

    std::string dataset, out_dir = "bench_out";
    int concurrency = 1;
    auto* s_bench = app.add_subcommand("bench", "run a dataset and report EM/F1 and search counts");
    add_common(s_bench);
    s_bench->add_option("dataset", dataset, "dataset JSONL {id, question, golden_answers}")->required();
    s_bench->add_option("--concurrency", concurrency)->capture_default_str()->check(CLI::PositiveNumber);
    s_bench->add_option("--out", out_dir, "output directory")->capture_default_str();

    std::string score_file, score_toolset = "local";
    std::vector<std::string> golds;
    bool strict = false;
    auto* s_score = app.add_subcommand("score", "format check and reward of a trajectory file");
    s_score->add_option("trajectory", score_file)->required();
    s_score->add_option("--gold", golds, "gold answer (repeatable)")->required();
    s_score->add_option("--toolset", score_toolset, "local, web, planner or a comma list")->capture_default_str();
    s_score->add_flag("--strict", strict, "require think before every call and no stray text");

    RefineArgs refine_args;
    auto* s_refine = app.add_subcommand("refine", "print the refined evidence of a trajectory file");
    add_common(s_refine);
    s_refine->add_option("trajectory", refine_args.file)->required();
    s_refine->add_option("--toolset", refine_args.toolset, "local, web or a comma list")->capture_default_str();
    s_refine->add_option("--alpha", refine_args.alpha);
    s_refine->add_option("--beta", refine_args.beta);
    s_refine->add_option("--min-per-round", refine_args.min_per_round);
    s_refine->add_option("--other-conclusion", refine_args.other_conclusion);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*s_ingest) return cmd_ingest(ingest, opts);
        if (*s_graph) return cmd_build_graph(graph_store, graph_extractor, opts);
        if (*s_ask) return cmd_ask(question, trace_path, opts);
        if (*s_bench) return cmd_bench(dataset, out_dir, concurrency, opts);
        if (*s_score) return cmd_score(score_file, golds, score_toolset, strict);
        if (*s_refine) return cmd_refine(refine_args, opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
