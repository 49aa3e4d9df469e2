#include "strata/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "strata/errors.hpp"
#include "strata/text.hpp"

namespace strata {

void RefinerConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 100.0)) throw ConfigError("refiner alpha must be in (0, 100]");
    if (!(beta >= 0.0 && beta <= 100.0)) throw ConfigError("refiner beta must be in [0, 100]");
    if (min_per_round < 0) throw ConfigError("refiner min_per_round must be >= 0");
}

std::size_t quota(double percent, std::size_t n) {
    const double raw = percent * static_cast<double>(n) / 100.0;
    const double q = std::ceil(raw - 1e-9);
    if (q <= 0.0) return 0;
    return std::min(n, static_cast<std::size_t>(q));
}

std::vector<std::string> next_thinks(const RoundView& view) {
    std::vector<std::string> out;
    out.reserve(view.rounds.size());
    const std::string fallback = view.conclusion.value_or("");
    for (std::size_t i = 0; i < view.rounds.size(); ++i) {
        std::string target = i + 1 < view.rounds.size() ? view.rounds[i + 1].think : view.final_think;
        if (text::is_blank(target)) target = fallback;
        out.push_back(std::move(target));
    }
    return out;
}

namespace {

std::vector<ScoredEvidence> score_against(const std::vector<Evidence>& items, std::string_view target,
                                          const EmbeddingProvider& embedder, RefineStep step) {
    if (items.empty()) return {};
    std::vector<std::string> texts;
    texts.reserve(items.size() + 1);
    for (const auto& e : items) texts.push_back(e.text);
    texts.emplace_back(target);
    auto vectors = embedder.embed(texts);
    const Vector& t = vectors.back();
    std::vector<ScoredEvidence> out;
    out.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) out.push_back({items[i], similarity(vectors[i], t), step});
    return out;
}

bool order_key_less(const Evidence& a, const Evidence& b) {
    return std::tie(a.round_index, a.rank) < std::tie(b.round_index, b.rank);
}

// Indices of the `keep` best entries: score descending, then original order.
std::vector<std::size_t> top_indices(const std::vector<ScoredEvidence>& scored, std::size_t keep) {
    std::vector<std::size_t> idx(scored.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scored[a].score != scored[b].score) return scored[a].score > scored[b].score;
        return order_key_less(scored[a].evidence, scored[b].evidence);
    });
    idx.resize(std::min(keep, idx.size()));
    return idx;
}

}  // namespace

std::vector<ScoredEvidence> score_step1(const Round& round, std::string_view next_think,
                                        const EmbeddingProvider& embedder) {
    return score_against(round.evidence, next_think, embedder, RefineStep::Local);
}

Step1Selection select_step1(const std::vector<Round>& rounds, const std::vector<std::string>& thinks,
                            const RefinerConfig& config, const EmbeddingProvider& embedder) {
    if (thinks.size() != rounds.size()) throw std::invalid_argument("select_step1: thinks not aligned with rounds");
    Step1Selection out;
    for (std::size_t r = 0; r < rounds.size(); ++r) {
        auto scored = score_step1(rounds[r], thinks[r], embedder);
        const std::size_t n = scored.size();
        const std::size_t keep =
            std::min(n, std::max(static_cast<std::size_t>(std::max(config.min_per_round, 0)), quota(config.alpha, n)));
        std::vector<bool> chosen(n, false);
        for (std::size_t i : top_indices(scored, keep)) chosen[i] = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) {
                out.selected.push_back(std::move(scored[i]));
            } else {
                out.remainder.push_back(std::move(scored[i].evidence));
            }
        }
    }
    return out;
}

std::vector<ScoredEvidence> score_step2(const std::vector<Evidence>& remainder, std::string_view conclusion,
                                        std::optional<std::string_view> other_conclusion,
                                        const EmbeddingProvider& embedder) {
    std::string target(conclusion);
    if (other_conclusion) {
        target += '\n';
        target += *other_conclusion;
    }
    return score_against(remainder, target, embedder, RefineStep::Global);
}

RefinedEvidenceSet refine(const ParsedTrajectory& trajectory, std::optional<std::string> other_conclusion,
                          const RefinerConfig& config, const EmbeddingProvider& embedder, AgentSide side) {
    config.validate();
    RoundView view = to_rounds(trajectory);
    std::size_t total = 0;
    for (const auto& r : view.rounds) total += r.evidence.size();
    if (total == 0) throw NoEvidence();

    Step1Selection step1 = select_step1(view.rounds, next_thinks(view), config, embedder);

    RefinedEvidenceSet out;
    out.source_agent = side;
    out.items = std::move(step1.selected);

    const bool have_conclusion = view.conclusion && !text::is_blank(*view.conclusion);
    if (have_conclusion && !step1.remainder.empty()) {
        std::optional<std::string_view> other;
        if (other_conclusion && !text::is_blank(*other_conclusion)) other = text::trim(*other_conclusion);
        auto scored = score_step2(step1.remainder, *view.conclusion, other, embedder);
        for (std::size_t i : top_indices(scored, quota(config.beta, scored.size()))) {
            out.items.push_back(std::move(scored[i]));
        }
    }
    std::sort(out.items.begin(), out.items.end(),
              [](const ScoredEvidence& a, const ScoredEvidence& b) { return order_key_less(a.evidence, b.evidence); });
    return out;
}

std::string format_refined(const RefinedEvidenceSet& set) {
    return format_refined(std::span<const RefinedEvidenceSet>(&set, 1));
}

std::string format_refined(std::span<const RefinedEvidenceSet> sets) {
    std::vector<std::pair<EvidenceSource, std::string>> lines;
    for (AgentSide side : {AgentSide::Local, AgentSide::Web}) {
        for (const auto& set : sets) {
            if (set.source_agent != side) continue;
            for (const auto& item : set.items) lines.emplace_back(item.evidence.source, item.evidence.text);
        }
    }
    if (lines.empty()) return std::string(kNoEvidenceSentinel);
    return format_evidence_list(lines);
}

}  // namespace strata
