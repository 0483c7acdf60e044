#pragma once

// Exact minimum cosine distance from every benign row to a harmful reference
// set, plus the selections, sweeps, reports and shift measurements built on it.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "proxsafe/emb_io.hpp"

namespace proxsafe {

/// Cosine distance 1 - a.b / (|a||b|), clamped to [0, 2]. Zero-norm input is
/// a degenerate-embedding error.
double distance(std::span<const float> a, std::span<const float> b);

struct EngineOptions {
    std::size_t chunk_rows = 1024;  // benign rows per work unit
    unsigned workers = 0;           // 0 = hardware concurrency
};

struct NearestHarmful {
    double d_min = 0.0;
    std::uint32_t index = 0;  // lowest harmful index among exact ties
};

/// Streaming core: one entry per benign row. Never builds the N x M distance
/// matrix; output is bitwise-identical for every chunk_rows and worker count.
std::vector<NearestHarmful> nearest_harmful(const EmbeddingMatrix& benign,
                                            const EmbeddingMatrix& harmful,
                                            const EngineOptions& options = {});

struct RankEntry {
    std::string benign_id;
    double d_min = 0.0;
    std::uint32_t nearest_harmful = 0;

    friend bool operator==(const RankEntry&, const RankEntry&) = default;
};

struct ProximityRanking {
    AxisTag axis;
    std::size_t benign_count = 0;
    std::size_t harmful_count = 0;
    std::vector<RankEntry> entries;  // benign row order

    friend bool operator==(const ProximityRanking&, const ProximityRanking&) = default;
};

ProximityRanking min_distances(const AlignedSet& benign, const AlignedSet& harmful,
                               const EngineOptions& options = {});

enum class Direction { proximate, distant };

std::string_view to_string(Direction d) noexcept;
Direction parse_direction(std::string_view name);

struct FilterSpec {
    int k_percent = 25;
    Direction direction = Direction::proximate;
    AxisTag axis;

    void validate() const;
};

/// max(1, floor(k * n / 100))
std::size_t selection_count(int k_percent, std::size_t n);

struct SelectionResult {
    std::vector<std::string> selected_ids;  // in sort-key order
    std::vector<std::size_t> selected_rows;
    double cutoff_distance = 0.0;
    FilterSpec spec;
};

/// Benign row indices ordered by the direction's key: proximate ascending
/// d_min, distant descending d_min; ties by ascending row index in both.
std::vector<std::size_t> selection_order(const ProximityRanking& r, Direction direction);

SelectionResult select(const ProximityRanking& r, const FilterSpec& spec);

std::vector<SelectionResult> sweep(const ProximityRanking& r, std::span<const int> ks,
                                   Direction direction);

/// Uniform sample of `count` of `n` rows without replacement, in draw order.
/// Seeded std::mt19937_64 with rejection-sampled bounds, so the result is the
/// same on every platform.
std::vector<std::size_t> random_baseline(std::size_t n, std::size_t count, std::uint64_t seed);

/// Manifest rows for a selection, in selection order.
SampleManifest selection_manifest(const SelectionResult& s, const SampleManifest& benign);
SampleManifest rows_manifest(std::span<const std::size_t> rows, const SampleManifest& benign);

/// 1-based position of every benign row in proximate order.
std::vector<std::size_t> proximate_ranks(const ProximityRanking& r);

/// {"id","d_min","nearest_id","rank"} per benign row, in row order. d_min is
/// stored rounded to float32.
std::string ranking_jsonl(const ProximityRanking& r, const SampleManifest& harmful);

struct ParsedRankingRow {
    std::string id;
    float d_min = 0.0f;
    std::string nearest_id;
    std::size_t rank = 0;
};

std::vector<ParsedRankingRow> read_ranking(const std::filesystem::path& path);

/// Rows that share both d_min and nearest harmful index with another row,
/// which almost always means duplicated embeddings upstream.
std::size_t count_duplicate_distances(const ProximityRanking& r);

struct PairRow {
    std::string dataset;
    std::string benign_id;
    std::string benign_text;
    std::string harmful_id;
    std::string harmful_text;
    double d_min = 0.0;
};

struct PairsReport {
    Direction direction = Direction::proximate;
    std::vector<PairRow> rows;
    std::vector<std::string> warnings;
};

PairsReport nearest_pairs_report(const ProximityRanking& r, const SampleManifest& benign,
                                 const SampleManifest& harmful, std::size_t top_n,
                                 Direction direction);

std::string pairs_markdown(const PairsReport& report);
std::string pairs_csv(const PairsReport& report);

struct ShiftReport {
    std::vector<double> per_sample;
    double mean_shift = 0.0;
};

ShiftReport embedding_shift(const EmbeddingMatrix& before, const EmbeddingMatrix& after);

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;

    double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};

/// Equal-width bins over [lo, hi]; values equal to hi land in the last bin.
Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi);
Histogram histogram(std::span<const double> values, std::size_t bins);

std::string histogram_csv(const Histogram& h);

}  // namespace proxsafe
