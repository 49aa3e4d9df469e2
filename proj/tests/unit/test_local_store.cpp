#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "strata/errors.hpp"
#include "strata/generation.hpp"
#include "strata/local_store.hpp"
#include "strata/text.hpp"

using namespace strata;

namespace {

auto hashed() {
    return std::make_shared<const HashedEmbedder>();
}

LocalStore kapalkundala_store() {
    auto docs = read_documents_jsonl(testing::fixtures() / "kapalkundala/corpus.jsonl");
    auto corpus = ingest_chunks(docs, 128, hashed());
    RuleBasedExtractor ex;
    auto graph = build_graph(corpus, ex);
    return LocalStore(std::move(corpus), std::move(graph));
}

class ThrowingExtractor final : public TripleExtractor {
public:
    std::vector<TripleSurface> extract(const Chunk& c) override {
        if (c.id.value == 1) throw std::runtime_error("boom");
        return {};
    }
};

}  // namespace

TEST_CASE("document loading") {
    testing::TempDir dir;
    testing::spit(dir / "d.jsonl", "{\"doc_id\":\"a\",\"text\":\"x\"}\n\n{\"doc_id\":\"b\",\"text\":\"y\"}\n");
    auto docs = read_documents_jsonl(dir / "d.jsonl");
    REQUIRE(docs.size() == 2);
    CHECK(docs[1].doc_id == "b");
    CHECK_THROWS(read_documents_jsonl(dir / "missing.jsonl"));
}

TEST_CASE("chunking splits into token windows") {
    std::string long_text;
    for (int i = 0; i < 70; ++i) long_text += "w" + std::to_string(i) + "  ";
    auto corpus = ingest_chunks({{"d", long_text}, {"e", "   "}, {"f", "short doc"}}, 32, hashed());
    REQUIRE(corpus.size() == 4);  // 32 + 32 + 6, then "short doc"
    CHECK(text::whitespace_tokens(corpus.chunks()[0].text).size() == 32);
    CHECK(corpus.chunks()[2].text == "w64 w65 w66 w67 w68 w69");
    CHECK(corpus.chunks()[3].doc_id == "f");
    CHECK(corpus.chunks()[3].id.value == 3);
    CHECK(corpus.vectors().size() == 4);
    CHECK_THROWS_AS(ingest_chunks({{"d", " "}}, 32, hashed()), EmptyCorpus);
    CHECK_THROWS_AS(ingest_chunks({}, 32, hashed()), EmptyCorpus);
    CHECK_THROWS_AS(ingest_chunks({{"d", "x"}}, 8, hashed()), std::invalid_argument);
}

TEST_CASE("rule-based extraction") {
    auto t = RuleBasedExtractor::extract_sentence("Kapalkundala is a novel by Bankim Chandra Chattopadhyay.");
    REQUIRE(t.size() == 1);
    CHECK(t[0].subject == "Kapalkundala");
    CHECK(t[0].predicate == "is a novel by");
    CHECK(t[0].object == "Bankim Chandra Chattopadhyay");
    auto u = RuleBasedExtractor::extract_sentence("The Bank of England was founded in 1694, by charter.");
    REQUIRE(u.size() == 1);
    CHECK(u[0].subject == "The Bank of England");
    CHECK(u[0].object == "1694");
    CHECK(RuleBasedExtractor::extract_sentence("He was the younger sibling of Sanjib.").empty());
    CHECK(RuleBasedExtractor::extract_sentence("the river is long").empty());
    auto dup = RuleBasedExtractor::extract_sentence("Foo Bar Foo Bar was born in Delhi");
    REQUIRE(dup.size() == 1);
    CHECK(dup[0].subject == "Foo Bar");
}

TEST_CASE("graph construction, entities and adjacency") {
    LocalStore store = kapalkundala_store();
    const auto& g = store.graph();
    CHECK_FALSE(g.empty());
    auto it = std::find_if(g.entities().begin(), g.entities().end(),
                           [](const EntityRecord& e) { return e.name == "Bankim Chandra Chattopadhyay"; });
    REQUIRE(it != g.entities().end());
    CHECK(it->adjacent_chunks.size() >= 3);
    for (const auto& e : g.entities()) {
        for (auto id : e.adjacent_chunks) {
            CHECK(text::to_lower_ascii(store.corpus().at(id).text).find(text::to_lower_ascii(e.name)) !=
                  std::string::npos);
        }
    }
    // Case-insensitive dedupe: no two entity names equal ignoring case.
    std::set<std::string> lowered;
    for (const auto& e : g.entities()) CHECK(lowered.insert(text::to_lower_ascii(e.name)).second);
}

TEST_CASE("extractor failure names the chunk") {
    auto corpus = ingest_chunks({{"a", "One doc"}, {"b", "Two doc"}}, 32, hashed());
    ThrowingExtractor ex;
    try {
        build_graph(corpus, ex);
        FAIL("expected ExtractorFailure");
    } catch (const ExtractorFailure& e) {
        CHECK(e.chunk_id == "1");
    }
}

TEST_CASE("llm extractor parses JSON arrays") {
    ScriptedClient client(ScriptedClient::Scripts{
        {"*", {R"(Here: [["Kapalkundala", "written by", "Bankim"], {"subject": "A", "predicate": "b", "object": "C"}, 5])"}}});
    LlmTripleExtractor ex(client);
    auto t = ex.extract(Chunk{ChunkId{0}, "text", "d"});
    REQUIRE(t.size() == 2);
    CHECK(t[0].predicate == "written by");
    CHECK(t[1].object == "C");
    ScriptedClient bad(ScriptedClient::Scripts{{"*", {"no json"}}});
    LlmTripleExtractor ex2(bad);
    CHECK_THROWS(ex2.extract(Chunk{ChunkId{0}, "text", "d"}));
}

TEST_CASE("chunk and graph search") {
    LocalStore store = kapalkundala_store();
    auto hits = store.chunk_search("Kapalkundala author", 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].chunk.doc_id == "kapalkundala");
    CHECK(hits[0].score >= hits[1].score);
    CHECK(store.chunk_search("Kapalkundala", 1000).size() == store.corpus().size());
    CHECK_THROWS_AS(store.chunk_search("  ", 3), EmptyQuery);
    CHECK_THROWS_AS(store.chunk_search("x", 0), std::invalid_argument);

    auto triples = store.graph_search("Bankim Chandra Chattopadhyay sibling", 5);
    REQUIRE_FALSE(triples.empty());
    bool brother = false;
    for (const auto& t : triples) brother |= t.triple.predicate.find("brother") != std::string::npos;
    CHECK(brother);
    CHECK_THROWS_AS(store.graph_search("", 5), EmptyQuery);

    LocalStore no_graph(store.corpus(), KnowledgeGraph{});
    CHECK(no_graph.graph_search("anything", 5).empty());
}

TEST_CASE("ties in chunk search break by id") {
    auto corpus = ingest_chunks({{"a", "same words here"}, {"b", "same words here"}, {"c", "other"}}, 32, hashed());
    LocalStore store(std::move(corpus), KnowledgeGraph{});
    auto hits = store.chunk_search("same words", 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].chunk.id.value == 0);
    CHECK(hits[1].chunk.id.value == 1);
}

TEST_CASE("adjacent passages resolve entities") {
    LocalStore store = kapalkundala_store();
    auto exact = store.get_adjacent_passages("bankim chandra chattopadhyay", 10);
    CHECK(exact.size() >= 3);
    CHECK(std::is_sorted(exact.begin(), exact.end(),
                         [](const Chunk& a, const Chunk& b) { return a.id.value < b.id.value; }));
    CHECK(store.get_adjacent_passages("bankim chandra chattopadhyay", 1).size() == 1);
    auto fuzzy = store.get_adjacent_passages("Chattopadhyay Bankim", 10);
    CHECK(fuzzy.size() == exact.size());
    CHECK(store.get_adjacent_passages("zzzz qqqq", 10).empty());
}

TEST_CASE("persist and load round trip") {
    testing::TempDir dir;
    LocalStore store = kapalkundala_store();
    store.persist(dir.path());
    LocalStore back = LocalStore::load(dir.path());
    CHECK(back.corpus().size() == store.corpus().size());
    CHECK(back.corpus().vectors() == store.corpus().vectors());
    CHECK(back.graph().triples().size() == store.graph().triples().size());
    CHECK(back.graph().entity_vectors() == store.graph().entity_vectors());
    auto a = store.chunk_search("Palamau travelogue", 5);
    auto b = back.chunk_search("Palamau travelogue", 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].chunk.id.value == b[i].chunk.id.value);
        CHECK(a[i].score == b[i].score);
    }
}

TEST_CASE("corrupted stores are rejected") {
    testing::TempDir dir;
    kapalkundala_store().persist(dir.path());
    {
        std::fstream f(dir / "chunks.jsonl", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(5);
        f.put('#');
    }
    CHECK_THROWS_AS(LocalStore::load(dir.path()), StorageCorrupt);

    testing::TempDir dir2;
    kapalkundala_store().persist(dir2.path());
    std::filesystem::resize_file(dir2 / "chunk_vectors.f32", 12);
    CHECK_THROWS_AS(LocalStore::load(dir2.path()), StorageCorrupt);

    testing::TempDir dir3;
    kapalkundala_store().persist(dir3.path());
    auto other_dim = std::make_shared<const HashedEmbedder>(32);
    CHECK_THROWS_AS(LocalStore::load(dir3.path(), other_dim), ConfigError);

    testing::TempDir empty;
    CHECK_THROWS_AS(LocalStore::load(empty.path()), StorageCorrupt);
}

TEST_CASE("rank_by_similarity orders by score then index") {
    std::vector<Vector> rows{{0.0f, 1.0f}, {1.0f, 0.0f}, {1.0f, 0.0f}, {0.6f, 0.8f}};
    auto r = rank_by_similarity({1.0f, 0.0f}, rows, 3);
    REQUIRE(r.size() == 3);
    CHECK(r[0].first == 1);
    CHECK(r[1].first == 2);
    CHECK(r[2].first == 3);
    CHECK(rank_by_similarity({1.0f, 0.0f}, rows, 10).size() == 4);
}
