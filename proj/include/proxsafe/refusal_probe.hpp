#pragma once

// Layer-wise refusal directions (mean hidden state of refused prompts minus
// mean of complied prompts, per layer), projections of checkpoints onto those
// frozen directions, and late-layer suppression summaries.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "proxsafe/emb_io.hpp"

namespace proxsafe {

/// One sample x dim matrix per layer (0-based), rows aligned to sample_ids.
struct LayerActivations {
    std::vector<EmbeddingMatrix> layers;
    std::vector<std::string> sample_ids;
    std::string checkpoint_tag;

    std::size_t layer_count() const noexcept { return layers.size(); }
    std::size_t sample_count() const noexcept { return sample_ids.size(); }
    std::size_t dim() const noexcept { return layers.empty() ? 0 : layers.front().dim(); }

    void validate() const;
};

struct RefusalSplit {
    std::vector<std::string> refused_ids;
    std::vector<std::string> complied_ids;
};

struct LayerDirection {
    std::vector<double> raw;   // mean(R) - mean(C)
    std::vector<double> unit;  // raw / |raw|
    double norm = 0.0;
};

struct RefusalDirectionSet {
    std::vector<LayerDirection> layers;
    std::string checkpoint_tag;  // provenance: where the split was taken
    std::size_t refused_count = 0;
    std::size_t complied_count = 0;
    std::vector<std::string> warnings;
};

// Splits with fewer complied (or refused) samples than this get a warning.
inline constexpr std::size_t kSmallSplitWarning = 30;

RefusalDirectionSet extract_directions(const LayerActivations& acts, const RefusalSplit& split);

/// Layer-major: values[layer * samples + sample].
struct Projections {
    std::string checkpoint_tag;
    std::size_t layers = 0;
    std::size_t samples = 0;
    std::vector<double> values;

    double at(std::size_t layer, std::size_t sample) const { return values[layer * samples + sample]; }
};

/// Dot products with the frozen unit directions. Never recomputes directions.
Projections project(const LayerActivations& acts, const RefusalDirectionSet& dirs);

/// Projections restricted to the given sample rows, in the given order.
Projections subset(const Projections& p, const std::vector<std::size_t>& rows);

struct ProjectionCurve {
    std::string checkpoint_tag;
    std::size_t sample_count = 0;
    std::vector<double> mean_projection;  // per layer
};

ProjectionCurve mean_curve(const Projections& p);

struct LayerWindow {
    std::size_t first = 20;
    std::size_t last = 26;  // inclusive
};

struct SuppressionDelta {
    std::string pretrained_tag;
    std::string finetuned_tag;
    std::vector<double> delta;  // finetuned - pretrained, per layer
    LayerWindow window;
    double window_mean = 0.0;
    bool suppressed = false;  // window_mean < 0
};

SuppressionDelta suppression_delta(const ProjectionCurve& pretrained, const ProjectionCurve& finetuned,
                                   LayerWindow window = {});

/// Throws unless `tag` names the pretrained checkpoint. Directions may only be
/// extracted from the pretrained model's split.
void require_pretrained(std::string_view tag, std::string_view pretrained_tag);

/// Reads layer_<n>.emb1 files (n = 0..L-1, contiguous) from `dir`.
LayerActivations read_activations(const std::filesystem::path& dir,
                                  std::vector<std::string> sample_ids, std::string checkpoint_tag);

struct ProbeManifest {
    std::vector<std::string> ids;
    RefusalSplit split;
};

/// JSONL with "id" and boolean "refused" per row.
ProbeManifest read_probe_manifest(const std::filesystem::path& path);

// "layer,mean_projection" rows.
std::string curve_csv(const ProjectionCurve& curve);

// layer, one mean_projection column per curve, then one delta column per
// non-pretrained curve. curves[0] must be the pretrained one.
std::string combined_delta_csv(const std::vector<ProjectionCurve>& curves);

}  // namespace proxsafe
