#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "strata/trajectory.hpp"

namespace strata {

// Lowercase, strip punctuation (ASCII and common Unicode/CJK marks), drop
// the articles a/an/the when they precede a word of two or more characters,
// collapse whitespace.
std::string normalize_answer(std::string_view text);

// Tokens of a normalized answer: whitespace tokens, with every CJK
// character split out as its own token.
std::vector<std::string> answer_tokens(std::string_view normalized);

int exact_match(std::string_view prediction, std::string_view gold);
double f1_score(std::string_view prediction, std::string_view gold);
// Max over golds; 0 when golds is empty.
int exact_match(std::string_view prediction, const std::vector<std::string>& golds);
double f1_score(std::string_view prediction, const std::vector<std::string>& golds);

enum class FormatMode {
    Lenient,  // parse, legal alternation, exactly one answer, only declared tools
    Strict,   // additionally: think before every call and the answer, no stray text
};

struct FormatReport {
    bool valid = false;
    std::vector<std::string> violations;
    std::set<std::string> tool_types_used;
    std::size_t toolset_size = 0;
};

FormatReport validate_format(std::string_view trajectory_text, const Toolset& toolset,
                             FormatMode mode = FormatMode::Lenient);
FormatReport validate_format(const ParsedTrajectory& trajectory, FormatMode mode = FormatMode::Lenient);

struct RewardReport {
    FormatReport format;
    int em = 0;
    double f1 = 0.0;
    double reward = 0.0;
    std::string prediction;
    std::vector<std::string> golds;
};

// 0 when the format is invalid; F1 when positive; else 0.1 * t / T with t
// the number of distinct tools used and T the toolset size.
double reward_from(const FormatReport& format, double f1);

RewardReport compute_reward(std::string_view trajectory_text, const std::vector<std::string>& golds,
                            const Toolset& toolset, FormatMode mode = FormatMode::Lenient);
RewardReport compute_reward(const ParsedTrajectory& trajectory, const std::vector<std::string>& golds,
                            FormatMode mode = FormatMode::Lenient);

struct SearchCounts {
    int local = 0;   // chunk_search + graph_search + get_adjacent_passages
    int web = 0;     // web_search only
    int browse = 0;  // browse_url, never part of `web`

    SearchCounts& operator+=(const SearchCounts& o);
    bool operator==(const SearchCounts&) const = default;
};

SearchCounts count_searches(const ParsedTrajectory& trajectory);
// Whitespace tokens inside think segments.
std::size_t reasoning_tokens(const ParsedTrajectory& trajectory);

// ---------------------------------------------------------------------------

struct Sample {
    std::string id;
    std::string question;
    std::vector<std::string> golds;
};

struct DatasetLoad {
    std::vector<Sample> samples;
    std::vector<std::string> rejected;  // "<path>:<line>: reason"
};

// Line-delimited {id, question, golden_answers}. Malformed lines are
// reported in `rejected` and skipped.
DatasetLoad load_dataset(const std::filesystem::path& path);

struct PipelineResult {
    std::optional<std::string> answer;
    SearchCounts searches;
    std::size_t reasoning_tokens = 0;
};

using Pipeline = std::function<PipelineResult(const Sample&)>;

struct SampleRecord {
    std::string id;
    std::string question;
    std::vector<std::string> golds;
    std::optional<std::string> prediction;
    int em = 0;
    double f1 = 0.0;
    SearchCounts searches;
    std::size_t reasoning_tokens = 0;
    std::optional<std::string> error;
};

nlohmann::json to_json(const SampleRecord& r);

struct MetricsReport {
    double em_mean = 0.0;
    double f1_mean = 0.0;
    double avg_local_searches = 0.0;
    double avg_web_searches = 0.0;
    double avg_browses = 0.0;
    double avg_reasoning_tokens = 0.0;
    std::vector<SampleRecord> per_sample;  // dataset order; only completed samples
    bool interrupted = false;
};

nlohmann::json to_json(const MetricsReport& r);

struct BenchmarkOptions {
    int concurrency = 1;
    // When set, every finished sample is appended here (JSONL) and flushed.
    std::optional<std::filesystem::path> records_path;
    // Polled before each sample; workers stop taking new samples once set.
    const std::atomic<bool>* stop = nullptr;
};

// Exceptions from the pipeline become records with em = f1 = 0 and an error
// note. Means are over the recorded samples.
MetricsReport run_benchmark(const std::vector<Sample>& dataset, const Pipeline& pipeline,
                            const BenchmarkOptions& options = {});

MetricsReport aggregate(std::vector<SampleRecord> records);

// ---------------------------------------------------------------------------

struct ScoredRollout {
    std::string question;
    std::string trajectory_text;
    Toolset toolset;
    RewardReport report;
};

struct ExportedRollout {
    std::string question;
    std::string trajectory_text;
    Toolset toolset;
    std::vector<std::string> golds;
    double reward = 0.0;
    int em = 0;
    double f1 = 0.0;
    std::map<std::string, int> tool_counts;
};

// One JSON object per line: {question, trajectory, toolset, golds, reward,
// em, f1, tool_counts}. Throws StorageFailure when the file cannot be written.
std::size_t export_rollouts(const std::vector<ScoredRollout>& rollouts, const std::filesystem::path& path);
std::vector<ExportedRollout> import_rollouts(const std::filesystem::path& path);

}  // namespace strata
