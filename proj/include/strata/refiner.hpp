#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strata/embedding.hpp"
#include "strata/trajectory.hpp"

namespace strata {

struct RefinerConfig {
    double alpha = 30.0;  // percent kept per round in step 1, (0, 100]
    double beta = 20.0;   // percent of the step-1 remainder kept in step 2, [0, 100]
    int min_per_round = 1;

    // Throws ConfigError when out of range.
    void validate() const;
};

enum class RefineStep { Local, Global };
enum class AgentSide { Local, Web };

struct ScoredEvidence {
    Evidence evidence;
    double score = 0.0;
    RefineStep step = RefineStep::Local;
};

struct RefinedEvidenceSet {
    std::vector<ScoredEvidence> items;  // ordered by (round_index, rank)
    AgentSide source_agent = AgentSide::Local;
};

inline constexpr std::string_view kNoEvidenceSentinel = "No relevant evidence found.";

// ceil(percent / 100 * n), clamped to [0, n]. Exact for integral percents.
std::size_t quota(double percent, std::size_t n);

// Target text for each round's step-1 score: the think that follows the
// round's result, the final think for the last round, and the conclusion
// whenever that think is empty.
std::vector<std::string> next_thinks(const RoundView& view);

std::vector<ScoredEvidence> score_step1(const Round& round, std::string_view next_think,
                                        const EmbeddingProvider& embedder);

struct Step1Selection {
    std::vector<ScoredEvidence> selected;
    std::vector<Evidence> remainder;  // in (round_index, rank) order
};

// Per round keeps max(min_per_round, quota(alpha, n)) items (capped at n)
// by score, ties by rank.
Step1Selection select_step1(const std::vector<Round>& rounds, const std::vector<std::string>& thinks,
                            const RefinerConfig& config, const EmbeddingProvider& embedder);

// Scores against the conclusion, or against "conclusion\nother" when the
// other agent's conclusion is given.
std::vector<ScoredEvidence> score_step2(const std::vector<Evidence>& remainder, std::string_view conclusion,
                                        std::optional<std::string_view> other_conclusion,
                                        const EmbeddingProvider& embedder);

/// Two-step evidence refinement of one low-level trajectory.
///
/// Step 2 keeps quota(beta, |remainder|) of the step-1 remainder and is
/// skipped when the trajectory has no conclusion. Throws NoEvidence when
/// the trajectory holds no evidence at all.
RefinedEvidenceSet refine(const ParsedTrajectory& trajectory, std::optional<std::string> other_conclusion,
                          const RefinerConfig& config, const EmbeddingProvider& embedder,
                          AgentSide side = AgentSide::Local);

// Evidence lines only; kNoEvidenceSentinel when empty.
std::string format_refined(const RefinedEvidenceSet& set);
// Local-agent sets render before web-agent sets.
std::string format_refined(std::span<const RefinedEvidenceSet> sets);

}  // namespace strata
