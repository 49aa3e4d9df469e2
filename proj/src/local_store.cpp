#include "strata/local_store.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "strata/errors.hpp"
#include "strata/generation.hpp"
#include "strata/text.hpp"

namespace strata {

using nlohmann::json;
namespace fs = std::filesystem;

std::string Triple::index_text() const {
    return subject + " | " + predicate + " | " + object;
}

std::vector<Document> read_documents_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read corpus file: " + path.string());
    std::vector<Document> docs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        auto rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("text") || !rec["text"].is_string()) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": expected {doc_id, text}");
        }
        Document d;
        d.doc_id = rec.contains("doc_id") && rec["doc_id"].is_string() ? rec["doc_id"].get<std::string>()
                                                                       : "doc" + std::to_string(lineno);
        d.text = rec["text"].get<std::string>();
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<std::pair<std::size_t, double>> rank_by_similarity(const Vector& query, const std::vector<Vector>& rows,
                                                               std::size_t k) {
    std::vector<std::pair<std::size_t, double>> scored(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) scored[i] = {i, similarity(query, rows[i])};
    auto better = [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    k = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
    scored.resize(k);
    return scored;
}

// ---------------------------------------------------------------------------

ChunkCorpus::ChunkCorpus(std::vector<Chunk> chunks, std::shared_ptr<const EmbeddingProvider> embedder)
    : chunks_(std::move(chunks)), embedder_(std::move(embedder)) {
    std::vector<std::string> texts;
    texts.reserve(chunks_.size());
    for (const auto& c : chunks_) texts.push_back(c.text);
    vectors_ = embedder_->embed(texts);
}

ChunkCorpus::ChunkCorpus(std::vector<Chunk> chunks, std::vector<Vector> vectors,
                         std::shared_ptr<const EmbeddingProvider> embedder)
    : chunks_(std::move(chunks)), vectors_(std::move(vectors)), embedder_(std::move(embedder)) {}

ChunkCorpus ingest_chunks(const std::vector<Document>& documents, int max_chunk_tokens,
                          std::shared_ptr<const EmbeddingProvider> embedder) {
    if (max_chunk_tokens < 32) throw std::invalid_argument("max_chunk_tokens must be at least 32");
    std::vector<Chunk> chunks;
    for (const auto& doc : documents) {
        auto tokens = text::whitespace_tokens(doc.text);
        for (std::size_t begin = 0; begin < tokens.size(); begin += static_cast<std::size_t>(max_chunk_tokens)) {
            std::size_t end = std::min(tokens.size(), begin + static_cast<std::size_t>(max_chunk_tokens));
            Chunk c;
            c.id = ChunkId{static_cast<std::uint32_t>(chunks.size())};
            c.doc_id = doc.doc_id;
            c.text = text::join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                                                         tokens.begin() + static_cast<std::ptrdiff_t>(end)),
                                " ");
            chunks.push_back(std::move(c));
        }
    }
    if (chunks.empty()) throw EmptyCorpus("no document contains text");
    return ChunkCorpus(std::move(chunks), std::move(embedder));
}

// ---------------------------------------------------------------------------

namespace {

const std::unordered_set<std::string>& cue_verbs() {
    static const std::unordered_set<std::string> verbs{
        "is",        "was",       "are",      "were",     "wrote",   "published", "founded",  "married",
        "became",    "won",       "directed", "created",  "authored", "joined",   "studied",  "attended",
        "composed",  "released",  "developed", "invented", "discovered", "served", "received", "worked",
        "lived",     "died",      "has",      "had",      "belongs", "includes",  "contains", "lies",
        "flows",     "leads",     "plays",    "played",   "signed",  "produced",  "designed", "built",
        "established", "translated", "edited", "taught",  "hosts",   "borders",   "succeeded", "preceded",
    };
    return verbs;
}

const std::unordered_set<std::string>& subject_connectives() {
    static const std::unordered_set<std::string> words{"of", "the", "de", "da", "van", "von", "and", "&"};
    return words;
}

bool starts_upper_or_digit(std::string_view tok) {
    if (tok.empty()) return false;
    unsigned char c = static_cast<unsigned char>(tok.front());
    if (c == '"' || c == '\'' || c == '(') {
        if (tok.size() < 2) return false;
        c = static_cast<unsigned char>(tok[1]);
    }
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool starts_lower(std::string_view tok) {
    return !tok.empty() && tok.front() >= 'a' && tok.front() <= 'z';
}

std::string strip_punct(std::string_view tok) {
    std::string out;
    for (char c : tok) {
        if (std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80) out.push_back(c);
    }
    return text::to_lower_ascii(out);
}

std::vector<std::string> split_sentences(std::string_view body) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < body.size(); ++i) {
        cur.push_back(body[i]);
        bool end_mark = body[i] == '.' || body[i] == '!' || body[i] == '?';
        bool boundary = end_mark && (i + 1 == body.size() || body[i + 1] == ' ' || body[i + 1] == '\n');
        if (boundary) {
            if (!text::is_blank(cur)) out.emplace_back(text::trim(cur));
            cur.clear();
        }
    }
    if (!text::is_blank(cur)) out.emplace_back(text::trim(cur));
    return out;
}

std::string trim_object(std::string obj) {
    std::size_t cut = obj.find_first_of(",;:(");
    if (cut != std::string::npos) obj.resize(cut);
    while (!obj.empty() && (obj.back() == '.' || obj.back() == '!' || obj.back() == '?' || obj.back() == ' ' ||
                            obj.back() == '"' || obj.back() == '\'')) {
        obj.pop_back();
    }
    return std::string(text::trim(obj));
}

}  // namespace

std::vector<TripleSurface> RuleBasedExtractor::extract_sentence(std::string_view sentence) {
    auto tokens = text::whitespace_tokens(sentence);
    std::size_t verb = tokens.size();
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        if (cue_verbs().count(strip_punct(tokens[i]))) {
            verb = i;
            break;
        }
    }
    if (verb >= tokens.size()) return {};

    static const std::unordered_set<std::string> pronouns{"He", "She", "It", "They", "This", "These", "Those",
                                                          "That", "His", "Her", "Its", "Their", "We", "I"};
    if (pronouns.count(tokens[0])) return {};
    // Documents often open with their title followed by a sentence that
    // starts with the same name: "Foo Bar Foo Bar was ...".
    if (verb % 2 == 0 && std::equal(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(verb / 2),
                                    tokens.begin() + static_cast<std::ptrdiff_t>(verb / 2))) {
        tokens.erase(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(verb / 2));
        verb /= 2;
    }

    for (std::size_t i = 0; i < verb; ++i) {
        const auto& tok = tokens[i];
        if (tok.find_first_of(",;:()") != std::string::npos) return {};
        bool edge = i == 0 || i + 1 == verb;
        if (starts_upper_or_digit(tok)) continue;
        if (!edge && subject_connectives().count(tok)) continue;
        return {};
    }

    std::size_t obj = verb + 1;
    while (obj < tokens.size() && starts_lower(tokens[obj])) ++obj;
    if (obj >= tokens.size() || !starts_upper_or_digit(tokens[obj])) return {};

    TripleSurface t;
    t.subject = text::join(std::vector<std::string>(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(verb)), " ");
    t.predicate = text::join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(verb),
                                                      tokens.begin() + static_cast<std::ptrdiff_t>(obj)),
                             " ");
    t.object = trim_object(
        text::join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(obj), tokens.end()), " "));
    if (t.subject.empty() || t.predicate.empty() || t.object.empty()) return {};
    return {t};
}

std::vector<TripleSurface> RuleBasedExtractor::extract(const Chunk& chunk) {
    std::vector<TripleSurface> out;
    for (const auto& sentence : split_sentences(chunk.text)) {
        for (auto& t : extract_sentence(sentence)) out.push_back(std::move(t));
    }
    return out;
}

std::vector<TripleSurface> LlmTripleExtractor::extract(const Chunk& chunk) {
    static const std::string kInstruction =
        "Extract factual knowledge triples from the passage. Respond with a JSON array only, where each element is "
        "[subject, predicate, object] using surface forms copied from the passage.";
    std::vector<Message> messages{{"system", kInstruction}, {"user", chunk.text}};
    Generation g = client_.generate(messages, {});
    std::size_t open = g.text.find('[');
    std::size_t close = g.text.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw Error("no JSON array in extractor output");
    }
    auto arr = json::parse(g.text.substr(open, close - open + 1), nullptr, false);
    if (arr.is_discarded() || !arr.is_array()) throw Error("unparseable extractor output");
    std::vector<TripleSurface> out;
    for (const auto& item : arr) {
        TripleSurface t;
        if (item.is_array() && item.size() == 3 && item[0].is_string() && item[1].is_string() && item[2].is_string()) {
            t = {item[0].get<std::string>(), item[1].get<std::string>(), item[2].get<std::string>()};
        } else if (item.is_object()) {
            t = {item.value("subject", ""), item.value("predicate", ""), item.value("object", "")};
        } else {
            continue;
        }
        t.subject = std::string(text::trim(t.subject));
        t.predicate = std::string(text::trim(t.predicate));
        t.object = std::string(text::trim(t.object));
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples, std::vector<EntityRecord> entities,
                               std::vector<Vector> triple_vectors, std::vector<Vector> entity_vectors)
    : triples_(std::move(triples)),
      entities_(std::move(entities)),
      triple_vectors_(std::move(triple_vectors)),
      entity_vectors_(std::move(entity_vectors)) {}

KnowledgeGraph build_graph(const ChunkCorpus& corpus, TripleExtractor& extractor) {
    if (corpus.empty()) throw std::invalid_argument("build_graph requires a non-empty corpus");

    std::vector<Triple> triples;
    std::vector<std::string> entity_names;
    std::unordered_map<std::string, std::size_t> entity_index;
    auto note_entity = [&](const std::string& name) {
        auto key = text::to_lower_ascii(name);
        if (entity_index.emplace(key, entity_names.size()).second) entity_names.push_back(name);
    };

    for (const auto& chunk : corpus.chunks()) {
        std::vector<TripleSurface> found;
        try {
            found = extractor.extract(chunk);
        } catch (const std::exception& e) {
            throw ExtractorFailure(std::to_string(chunk.id.value), e.what());
        }
        for (auto& t : found) {
            if (t.subject.empty() || t.predicate.empty() || t.object.empty()) continue;
            note_entity(t.subject);
            note_entity(t.object);
            triples.push_back({std::move(t.subject), std::move(t.predicate), std::move(t.object), chunk.id});
        }
    }

    std::vector<std::string> lowered_chunks;
    lowered_chunks.reserve(corpus.size());
    for (const auto& c : corpus.chunks()) lowered_chunks.push_back(text::to_lower_ascii(c.text));

    std::vector<EntityRecord> entities;
    entities.reserve(entity_names.size());
    for (const auto& name : entity_names) {
        EntityRecord rec;
        rec.name = name;
        const std::string needle = text::to_lower_ascii(name);
        for (std::size_t i = 0; i < lowered_chunks.size(); ++i) {
            if (lowered_chunks[i].find(needle) != std::string::npos) {
                rec.adjacent_chunks.push_back(ChunkId{static_cast<std::uint32_t>(i)});
            }
        }
        entities.push_back(std::move(rec));
    }

    const auto& embedder = *corpus.embedder();
    std::vector<std::string> triple_texts;
    triple_texts.reserve(triples.size());
    for (const auto& t : triples) triple_texts.push_back(t.index_text());
    auto triple_vectors = embedder.embed(triple_texts);
    auto entity_vectors = embedder.embed(entity_names);
    return KnowledgeGraph(std::move(triples), std::move(entities), std::move(triple_vectors), std::move(entity_vectors));
}

// ---------------------------------------------------------------------------

LocalStore::LocalStore(ChunkCorpus corpus, KnowledgeGraph graph, StoreOptions options)
    : corpus_(std::move(corpus)), graph_(std::move(graph)), options_(options) {}

std::vector<ScoredChunk> LocalStore::chunk_search(std::string_view query, int k) const {
    if (text::is_blank(query)) throw EmptyQuery();
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    auto q = corpus_.embedder()->embed_one(query);
    std::vector<ScoredChunk> out;
    for (const auto& [idx, score] : rank_by_similarity(q, corpus_.vectors(), static_cast<std::size_t>(k))) {
        out.push_back({corpus_.chunks()[idx], score});
    }
    return out;
}

std::vector<ScoredTriple> LocalStore::graph_search(std::string_view query, int k) const {
    if (text::is_blank(query)) throw EmptyQuery();
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (graph_.empty()) return {};
    auto q = corpus_.embedder()->embed_one(query);
    std::vector<ScoredTriple> out;
    for (const auto& [idx, score] : rank_by_similarity(q, graph_.triple_vectors(), static_cast<std::size_t>(k))) {
        out.push_back({graph_.triples()[idx], score});
    }
    return out;
}

std::vector<Chunk> LocalStore::get_adjacent_passages(std::string_view entity, int k) const {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    const auto name = std::string(text::trim(entity));
    if (name.empty() || graph_.entities().empty()) return {};

    const EntityRecord* hit = nullptr;
    const auto lowered = text::to_lower_ascii(name);
    for (const auto& e : graph_.entities()) {
        if (text::to_lower_ascii(e.name) == lowered) {
            hit = &e;
            break;
        }
    }
    if (hit == nullptr) {
        auto q = corpus_.embedder()->embed_one(name);
        auto best = rank_by_similarity(q, graph_.entity_vectors(), 1);
        if (best.empty() || best.front().second < options_.entity_resolution_threshold) return {};
        hit = &graph_.entities()[best.front().first];
    }
    std::vector<Chunk> out;
    for (ChunkId id : hit->adjacent_chunks) {
        if (static_cast<int>(out.size()) >= k) break;
        out.push_back(corpus_.at(id));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kStoreVersion = 1;

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

std::string vectors_to_bytes(const std::vector<Vector>& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (float f : row) {
            auto bits = std::bit_cast<std::uint32_t>(f);
            for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
        }
    }
    return out;
}

std::vector<Vector> vectors_from_bytes(const std::string& bytes, std::size_t rows, std::size_t dim,
                                       const std::string& name) {
    if (bytes.size() != rows * dim * 4) throw StorageCorrupt(name + ": unexpected vector block size");
    std::vector<Vector> out(rows, Vector(dim));
    std::size_t at = 0;
    for (auto& row : out) {
        for (auto& f : row) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at++])) << (8 * b);
            f = std::bit_cast<float>(bits);
        }
    }
    return out;
}

void write_file(const fs::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageFailure("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw StorageFailure("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageCorrupt("missing store file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<json> parse_jsonl(const std::string& data, const std::string& name) {
    std::vector<json> out;
    std::istringstream in(data);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto rec = json::parse(line, nullptr, false);
        if (rec.is_discarded()) throw StorageCorrupt(name + ": malformed record");
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace

void LocalStore::persist(const fs::path& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StorageFailure("cannot create " + dir.string() + ": " + ec.message());

    std::map<std::string, std::string> files;
    {
        std::string s;
        for (const auto& c : corpus_.chunks()) {
            s += json{{"id", c.id.value}, {"doc_id", c.doc_id}, {"text", c.text}}.dump();
            s += '\n';
        }
        files["chunks.jsonl"] = std::move(s);
    }
    {
        std::string s;
        for (const auto& t : graph_.triples()) {
            s += json{{"subject", t.subject}, {"predicate", t.predicate}, {"object", t.object}, {"chunk", t.provenance.value}}
                     .dump();
            s += '\n';
        }
        files["triples.jsonl"] = std::move(s);
    }
    {
        std::string s;
        for (const auto& e : graph_.entities()) {
            std::vector<std::uint32_t> ids;
            for (auto id : e.adjacent_chunks) ids.push_back(id.value);
            s += json{{"name", e.name}, {"chunks", ids}}.dump();
            s += '\n';
        }
        files["entities.jsonl"] = std::move(s);
    }
    files["chunk_vectors.f32"] = vectors_to_bytes(corpus_.vectors());
    files["triple_vectors.f32"] = vectors_to_bytes(graph_.triple_vectors());
    files["entity_vectors.f32"] = vectors_to_bytes(graph_.entity_vectors());

    json manifest{
        {"format", "strata-store"},
        {"version", kStoreVersion},
        {"embedder", corpus_.embedder()->describe()},
        {"dimension", corpus_.embedder()->dimension()},
        {"counts", {{"chunks", corpus_.size()}, {"triples", graph_.triples().size()}, {"entities", graph_.entities().size()}}},
        {"files", json::object()},
    };
    for (const auto& [name, data] : files) {
        write_file(dir / name, data);
        manifest["files"][name] = {{"bytes", data.size()}, {"fnv1a64", hex64(text::fnv1a64(data))}};
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

LocalStore LocalStore::load(const fs::path& dir, std::shared_ptr<const EmbeddingProvider> embedder,
                            StoreOptions options) {
    auto manifest = json::parse(read_file(dir / "manifest.json"), nullptr, false);
    if (manifest.is_discarded() || manifest.value("format", "") != "strata-store") {
        throw StorageCorrupt("unreadable manifest in " + dir.string());
    }
    if (manifest.value("version", 0) != kStoreVersion) throw StorageCorrupt("unsupported store version");

    std::map<std::string, std::string> files;
    try {
        for (const auto& [name, meta] : manifest.at("files").items()) {
            std::string data = read_file(dir / name);
            if (data.size() != meta.at("bytes").get<std::size_t>()) throw StorageCorrupt(name + ": size mismatch");
            if (hex64(text::fnv1a64(data)) != meta.at("fnv1a64").get<std::string>()) {
                throw StorageCorrupt(name + ": checksum mismatch");
            }
            files[name] = std::move(data);
        }
    } catch (const json::exception& e) {
        throw StorageCorrupt(std::string("manifest: ") + e.what());
    }
    for (const char* required : {"chunks.jsonl", "triples.jsonl", "entities.jsonl", "chunk_vectors.f32",
                                 "triple_vectors.f32", "entity_vectors.f32"}) {
        if (!files.count(required)) throw StorageCorrupt(std::string("manifest lacks ") + required);
    }

    const auto& desc = manifest["embedder"];
    if (!embedder) {
        if (desc.value("kind", "") != "hashed") {
            throw ConfigError("store was built with a remote embedder; supply one to load it");
        }
        embedder = std::make_shared<HashedEmbedder>(desc.value("dimension", std::size_t{256}));
    } else if (embedder->describe().value("kind", "") != desc.value("kind", "") ||
               (embedder->dimension() != 0 && embedder->dimension() != manifest.value("dimension", std::size_t{0}))) {
        throw ConfigError("embedder does not match the one the store was built with");
    }
    const std::size_t dim = manifest.value("dimension", std::size_t{0});

    try {
        std::vector<Chunk> chunks;
        for (const auto& rec : parse_jsonl(files["chunks.jsonl"], "chunks.jsonl")) {
            Chunk c{ChunkId{rec.at("id").get<std::uint32_t>()}, rec.at("text").get<std::string>(),
                    rec.at("doc_id").get<std::string>()};
            if (c.id.value != chunks.size()) throw StorageCorrupt("chunks.jsonl: ids out of order");
            chunks.push_back(std::move(c));
        }
        std::vector<Triple> triples;
        for (const auto& rec : parse_jsonl(files["triples.jsonl"], "triples.jsonl")) {
            Triple t{rec.at("subject").get<std::string>(), rec.at("predicate").get<std::string>(),
                     rec.at("object").get<std::string>(), ChunkId{rec.at("chunk").get<std::uint32_t>()}};
            if (t.provenance.value >= chunks.size()) throw StorageCorrupt("triples.jsonl: dangling provenance");
            triples.push_back(std::move(t));
        }
        std::vector<EntityRecord> entities;
        for (const auto& rec : parse_jsonl(files["entities.jsonl"], "entities.jsonl")) {
            EntityRecord e;
            e.name = rec.at("name").get<std::string>();
            for (auto id : rec.at("chunks").get<std::vector<std::uint32_t>>()) {
                if (id >= chunks.size()) throw StorageCorrupt("entities.jsonl: dangling chunk");
                e.adjacent_chunks.push_back(ChunkId{id});
            }
            entities.push_back(std::move(e));
        }
        const auto& counts = manifest.at("counts");
        if (counts.at("chunks").get<std::size_t>() != chunks.size() ||
            counts.at("triples").get<std::size_t>() != triples.size() ||
            counts.at("entities").get<std::size_t>() != entities.size()) {
            throw StorageCorrupt("record counts disagree with manifest");
        }
        auto chunk_vectors = vectors_from_bytes(files["chunk_vectors.f32"], chunks.size(), dim, "chunk_vectors.f32");
        auto triple_vectors = vectors_from_bytes(files["triple_vectors.f32"], triples.size(), dim, "triple_vectors.f32");
        auto entity_vectors = vectors_from_bytes(files["entity_vectors.f32"], entities.size(), dim, "entity_vectors.f32");

        ChunkCorpus corpus(std::move(chunks), std::move(chunk_vectors), std::move(embedder));
        KnowledgeGraph graph(std::move(triples), std::move(entities), std::move(triple_vectors), std::move(entity_vectors));
        return LocalStore(std::move(corpus), std::move(graph), options);
    } catch (const json::exception& e) {
        throw StorageCorrupt(std::string("malformed store record: ") + e.what());
    }
}

}  // namespace strata
