#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "strata/embedding.hpp"

namespace strata {

class GenerationClient;

struct ChunkId {
    std::uint32_t value = 0;
    auto operator<=>(const ChunkId&) const = default;
};

struct Document {
    std::string doc_id;
    std::string text;
};

struct Chunk {
    ChunkId id;
    std::string text;
    std::string doc_id;

    bool operator==(const Chunk&) const = default;
};

struct Triple {
    std::string subject;
    std::string predicate;
    std::string object;
    ChunkId provenance;

    bool operator==(const Triple&) const = default;
    // "s | p | o", the string that is embedded for graph search.
    std::string index_text() const;
};

struct EntityRecord {
    std::string name;
    std::vector<ChunkId> adjacent_chunks;  // ascending, unique

    bool operator==(const EntityRecord&) const = default;
};

struct ScoredChunk {
    Chunk chunk;
    double score = 0.0;
};

struct ScoredTriple {
    Triple triple;
    double score = 0.0;
};

// Line-delimited {doc_id, text} records. Blank lines are skipped.
std::vector<Document> read_documents_jsonl(const std::filesystem::path& path);

class ChunkCorpus {
public:
    ChunkCorpus() = default;
    ChunkCorpus(std::vector<Chunk> chunks, std::shared_ptr<const EmbeddingProvider> embedder);
    ChunkCorpus(std::vector<Chunk> chunks, std::vector<Vector> vectors, std::shared_ptr<const EmbeddingProvider> embedder);

    const std::vector<Chunk>& chunks() const { return chunks_; }
    const std::vector<Vector>& vectors() const { return vectors_; }
    const std::shared_ptr<const EmbeddingProvider>& embedder() const { return embedder_; }
    const Chunk& at(ChunkId id) const { return chunks_.at(id.value); }
    std::size_t size() const { return chunks_.size(); }
    bool empty() const { return chunks_.empty(); }

private:
    std::vector<Chunk> chunks_;
    std::vector<Vector> vectors_;
    std::shared_ptr<const EmbeddingProvider> embedder_;
};

// Splits each document into runs of at most `max_chunk_tokens` whitespace
// tokens (no overlap), rejoined with single spaces, and embeds them.
// Throws EmptyCorpus when no document has text; max_chunk_tokens must be >= 32.
ChunkCorpus ingest_chunks(const std::vector<Document>& documents, int max_chunk_tokens,
                          std::shared_ptr<const EmbeddingProvider> embedder);

struct TripleSurface {
    std::string subject;
    std::string predicate;
    std::string object;
};

class TripleExtractor {
public:
    virtual ~TripleExtractor() = default;
    virtual std::vector<TripleSurface> extract(const Chunk& chunk) = 0;
};

/// Deterministic "X <verb phrase> Y" extractor.
///
/// Per sentence: the subject is the run of tokens before the first cue verb
/// and must be capitalized words (connectives like "of"/"the" allowed
/// inside); the predicate is the verb plus the following lowercase tokens;
/// the object is the remainder, which must start with a capitalized word or
/// a digit.
class RuleBasedExtractor final : public TripleExtractor {
public:
    std::vector<TripleSurface> extract(const Chunk& chunk) override;
    static std::vector<TripleSurface> extract_sentence(std::string_view sentence);
};

// Asks a generation endpoint for a JSON array of [subject, predicate, object].
class LlmTripleExtractor final : public TripleExtractor {
public:
    explicit LlmTripleExtractor(GenerationClient& client) : client_(client) {}
    std::vector<TripleSurface> extract(const Chunk& chunk) override;

private:
    GenerationClient& client_;
};

class KnowledgeGraph {
public:
    KnowledgeGraph() = default;
    KnowledgeGraph(std::vector<Triple> triples, std::vector<EntityRecord> entities, std::vector<Vector> triple_vectors,
                   std::vector<Vector> entity_vectors);

    const std::vector<Triple>& triples() const { return triples_; }
    const std::vector<EntityRecord>& entities() const { return entities_; }
    const std::vector<Vector>& triple_vectors() const { return triple_vectors_; }
    const std::vector<Vector>& entity_vectors() const { return entity_vectors_; }
    bool empty() const { return triples_.empty(); }

private:
    std::vector<Triple> triples_;
    std::vector<EntityRecord> entities_;
    std::vector<Vector> triple_vectors_;
    std::vector<Vector> entity_vectors_;
};

// Extractor failures surface as ExtractorFailure naming the chunk. Entities
// are the distinct subject/object surface forms (case-insensitive, first
// spelling wins); adjacency is every chunk whose text contains the name.
KnowledgeGraph build_graph(const ChunkCorpus& corpus, TripleExtractor& extractor);

struct StoreOptions {
    double entity_resolution_threshold = 0.5;
};

class LocalStore {
public:
    LocalStore(ChunkCorpus corpus, KnowledgeGraph graph, StoreOptions options = {});

    const ChunkCorpus& corpus() const { return corpus_; }
    const KnowledgeGraph& graph() const { return graph_; }
    const StoreOptions& options() const { return options_; }

    // Top-k by similarity, descending; ties by id ascending. Throw EmptyQuery
    // on blank queries and std::invalid_argument on k < 1.
    std::vector<ScoredChunk> chunk_search(std::string_view query, int k) const;
    std::vector<ScoredTriple> graph_search(std::string_view query, int k) const;

    // Resolves `entity` to the nearest entity name (exact case-insensitive
    // match first) and returns up to k of its adjacent chunks in id order.
    // Empty when nothing resolves above the threshold.
    std::vector<Chunk> get_adjacent_passages(std::string_view entity, int k) const;

    // Directory layout: manifest.json, chunks.jsonl, triples.jsonl,
    // entities.jsonl, and {chunk,triple,entity}_vectors.f32 (little-endian
    // float32, row-major). The manifest carries byte sizes and FNV-1a
    // checksums of every other file.
    void persist(const std::filesystem::path& dir) const;

    // Without an embedder, one is rebuilt from the manifest (hashed only).
    // Throws StorageCorrupt on any size/checksum/shape mismatch.
    static LocalStore load(const std::filesystem::path& dir, std::shared_ptr<const EmbeddingProvider> embedder = nullptr,
                           StoreOptions options = {});

private:
    ChunkCorpus corpus_;
    KnowledgeGraph graph_;
    StoreOptions options_;
};

// Indices of the k best rows by similarity to `query`, ties by index.
std::vector<std::pair<std::size_t, double>> rank_by_similarity(const Vector& query, const std::vector<Vector>& rows,
                                                               std::size_t k);

}  // namespace strata
