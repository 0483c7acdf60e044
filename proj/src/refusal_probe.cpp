#include "proxsafe/refusal_probe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "proxsafe/error.hpp"
#include "proxsafe/io_util.hpp"

namespace proxsafe {

void LayerActivations::validate() const {
    if (layers.empty()) fail(ErrorKind::shape, "activations for '" + checkpoint_tag + "' have no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].rows() != sample_ids.size()) {
            fail(ErrorKind::shape, "layer " + std::to_string(l) + " of '" + checkpoint_tag + "' has " +
                                       std::to_string(layers[l].rows()) + " rows, expected " +
                                       std::to_string(sample_ids.size()) + " samples");
        }
        if (layers[l].dim() != layers[0].dim()) {
            fail(ErrorKind::shape, "layer " + std::to_string(l) + " of '" + checkpoint_tag +
                                       "' has dim " + std::to_string(layers[l].dim()) +
                                       ", layer 0 has " + std::to_string(layers[0].dim()));
        }
    }
}

namespace {

std::vector<std::size_t> rows_for(const std::vector<std::string>& ids,
                                  const std::unordered_map<std::string_view, std::size_t>& index,
                                  std::string_view which) {
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) {
            fail(ErrorKind::split, std::string(which) + " id \"" + id + "\" is not in the activations");
        }
        rows.push_back(it->second);
    }
    return rows;
}

std::vector<double> mean_rows(const EmbeddingMatrix& m, const std::vector<std::size_t>& rows) {
    std::vector<double> mean(m.dim(), 0.0);
    for (std::size_t r : rows) {
        auto row = m.row(r);
        for (std::size_t d = 0; d < m.dim(); ++d) mean[d] += row[d];
    }
    for (auto& v : mean) v /= static_cast<double>(rows.size());
    return mean;
}

}  // namespace

RefusalDirectionSet extract_directions(const LayerActivations& acts, const RefusalSplit& split) {
    acts.validate();
    if (split.refused_ids.empty()) fail(ErrorKind::split, "refused subset is empty");
    if (split.complied_ids.empty()) fail(ErrorKind::split, "complied subset is empty");

    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < acts.sample_ids.size(); ++i) index.emplace(acts.sample_ids[i], i);
    std::unordered_set<std::string_view> refused(split.refused_ids.begin(), split.refused_ids.end());
    if (refused.size() != split.refused_ids.size()) fail(ErrorKind::split, "duplicate id in refused subset");
    for (const auto& id : split.complied_ids) {
        if (refused.contains(id)) {
            fail(ErrorKind::split, "id \"" + id + "\" is in both refused and complied subsets");
        }
    }
    const auto r_rows = rows_for(split.refused_ids, index, "refused");
    const auto c_rows = rows_for(split.complied_ids, index, "complied");

    RefusalDirectionSet set;
    set.checkpoint_tag = acts.checkpoint_tag;
    set.refused_count = r_rows.size();
    set.complied_count = c_rows.size();
    if (c_rows.size() < kSmallSplitWarning) {
        set.warnings.push_back("complied subset has only " + std::to_string(c_rows.size()) +
                               " sample(s); its mean is noisy");
    }
    if (r_rows.size() < kSmallSplitWarning) {
        set.warnings.push_back("refused subset has only " + std::to_string(r_rows.size()) +
                               " sample(s); its mean is noisy");
    }

    set.layers.reserve(acts.layer_count());
    for (std::size_t l = 0; l < acts.layer_count(); ++l) {
        auto refused_mean = mean_rows(acts.layers[l], r_rows);
        const auto complied_mean = mean_rows(acts.layers[l], c_rows);
        LayerDirection dir;
        dir.raw = std::move(refused_mean);
        double sq = 0.0;
        for (std::size_t d = 0; d < dir.raw.size(); ++d) {
            dir.raw[d] -= complied_mean[d];
            sq += dir.raw[d] * dir.raw[d];
        }
        dir.norm = std::sqrt(sq);
        if (!(dir.norm > 0.0)) {
            fail(ErrorKind::degenerate, "refusal direction at layer " + std::to_string(l) +
                                            " is zero (refused and complied means coincide)");
        }
        dir.unit.resize(dir.raw.size());
        for (std::size_t d = 0; d < dir.raw.size(); ++d) dir.unit[d] = dir.raw[d] / dir.norm;
        set.layers.push_back(std::move(dir));
    }
    return set;
}

Projections project(const LayerActivations& acts, const RefusalDirectionSet& dirs) {
    acts.validate();
    if (acts.layer_count() != dirs.layers.size()) {
        fail(ErrorKind::shape, "'" + acts.checkpoint_tag + "' has " + std::to_string(acts.layer_count()) +
                                   " layers but directions cover " + std::to_string(dirs.layers.size()));
    }
    if (acts.dim() != dirs.layers.front().unit.size()) {
        fail(ErrorKind::shape, "'" + acts.checkpoint_tag + "' hidden size " + std::to_string(acts.dim()) +
                                   " != direction dim " + std::to_string(dirs.layers.front().unit.size()));
    }
    Projections p;
    p.checkpoint_tag = acts.checkpoint_tag;
    p.layers = acts.layer_count();
    p.samples = acts.sample_count();
    p.values.resize(p.layers * p.samples);
    for (std::size_t l = 0; l < p.layers; ++l) {
        const auto& unit = dirs.layers[l].unit;
        for (std::size_t s = 0; s < p.samples; ++s) {
            auto h = acts.layers[l].row(s);
            double dot = 0.0;
            for (std::size_t d = 0; d < unit.size(); ++d) dot += static_cast<double>(h[d]) * unit[d];
            p.values[l * p.samples + s] = dot;
        }
    }
    return p;
}

Projections subset(const Projections& p, const std::vector<std::size_t>& rows) {
    Projections out;
    out.checkpoint_tag = p.checkpoint_tag;
    out.layers = p.layers;
    out.samples = rows.size();
    out.values.reserve(out.layers * out.samples);
    for (std::size_t l = 0; l < p.layers; ++l) {
        for (std::size_t r : rows) out.values.push_back(p.at(l, r));
    }
    return out;
}

ProjectionCurve mean_curve(const Projections& p) {
    if (p.samples == 0 || p.layers == 0) fail(ErrorKind::parameter, "mean_curve needs projections");
    ProjectionCurve c;
    c.checkpoint_tag = p.checkpoint_tag;
    c.sample_count = p.samples;
    c.mean_projection.resize(p.layers);
    for (std::size_t l = 0; l < p.layers; ++l) {
        double sum = 0.0;
        for (std::size_t s = 0; s < p.samples; ++s) sum += p.at(l, s);
        c.mean_projection[l] = sum / static_cast<double>(p.samples);
    }
    return c;
}

SuppressionDelta suppression_delta(const ProjectionCurve& pretrained, const ProjectionCurve& finetuned,
                                   LayerWindow window) {
    const std::size_t layers = pretrained.mean_projection.size();
    if (finetuned.mean_projection.size() != layers) {
        fail(ErrorKind::shape, "curve '" + finetuned.checkpoint_tag + "' has " +
                                   std::to_string(finetuned.mean_projection.size()) + " layers, '" +
                                   pretrained.checkpoint_tag + "' has " + std::to_string(layers));
    }
    if (window.first > window.last || window.last >= layers) {
        fail(ErrorKind::parameter, "layer window " + std::to_string(window.first) + "-" +
                                       std::to_string(window.last) + " outside 0-" +
                                       std::to_string(layers == 0 ? 0 : layers - 1));
    }
    SuppressionDelta out;
    out.pretrained_tag = pretrained.checkpoint_tag;
    out.finetuned_tag = finetuned.checkpoint_tag;
    out.window = window;
    out.delta.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        out.delta[l] = finetuned.mean_projection[l] - pretrained.mean_projection[l];
    }
    double sum = 0.0;
    for (std::size_t l = window.first; l <= window.last; ++l) sum += out.delta[l];
    out.window_mean = sum / static_cast<double>(window.last - window.first + 1);
    out.suppressed = out.window_mean < 0.0;
    return out;
}

void require_pretrained(std::string_view tag, std::string_view pretrained_tag) {
    if (tag != pretrained_tag) {
        fail(ErrorKind::parameter,
             "refusal directions are frozen from the pretrained checkpoint '" + std::string(pretrained_tag) +
                 "'; recomputing them from '" + std::string(tag) + "' is not allowed");
    }
}

LayerActivations read_activations(const std::filesystem::path& dir, std::vector<std::string> sample_ids,
                                  std::string checkpoint_tag) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) {
        fail(ErrorKind::io, "no such activation directory: " + dir.string());
    }
    std::map<std::size_t, std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        constexpr std::string_view prefix = "layer_";
        constexpr std::string_view suffix = ".emb1";
        if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) ||
            !name.ends_with(suffix)) {
            continue;
        }
        std::size_t layer = 0;
        const char* first = name.data() + prefix.size();
        const char* last = name.data() + name.size() - suffix.size();
        auto [ptr, err] = std::from_chars(first, last, layer);
        if (err != std::errc() || ptr != last) continue;
        if (!files.emplace(layer, entry.path()).second) {
            fail(ErrorKind::format, "layer " + std::to_string(layer) + " appears twice in " + dir.string());
        }
    }
    if (files.empty()) fail(ErrorKind::io, "no layer_<n>.emb1 files in " + dir.string());
    LayerActivations acts;
    acts.sample_ids = std::move(sample_ids);
    acts.checkpoint_tag = std::move(checkpoint_tag);
    std::size_t expected = 0;
    for (const auto& [layer, path] : files) {
        if (layer != expected) {
            fail(ErrorKind::format, "missing layer_" + std::to_string(expected) + ".emb1 in " + dir.string());
        }
        acts.layers.push_back(read_matrix(path));
        ++expected;
    }
    acts.validate();
    return acts;
}

ProbeManifest read_probe_manifest(const std::filesystem::path& path) {
    ProbeManifest man;
    std::unordered_set<std::string> seen;
    for_each_jsonl(path, [&](const nlohmann::json& obj, std::size_t line) {
        auto id = obj.at("id").get<std::string>();
        if (!seen.insert(id).second) {
            fail(ErrorKind::format, path.string() + ":" + std::to_string(line) + ": duplicate id \"" + id + "\"");
        }
        const auto& refused = obj.at("refused");
        if (!refused.is_boolean()) {
            fail(ErrorKind::format, path.string() + ":" + std::to_string(line) + ": 'refused' must be boolean");
        }
        (refused.get<bool>() ? man.split.refused_ids : man.split.complied_ids).push_back(id);
        man.ids.push_back(std::move(id));
    });
    return man;
}

std::string curve_csv(const ProjectionCurve& curve) {
    std::string out = "layer,mean_projection\n";
    for (std::size_t l = 0; l < curve.mean_projection.size(); ++l) {
        out += std::to_string(l) + ',' + format_fixed(curve.mean_projection[l], 6) + '\n';
    }
    return out;
}

std::string combined_delta_csv(const std::vector<ProjectionCurve>& curves) {
    if (curves.empty()) return {};
    const std::size_t layers = curves.front().mean_projection.size();
    for (const auto& c : curves) {
        if (c.mean_projection.size() != layers) {
            fail(ErrorKind::shape, "curve '" + c.checkpoint_tag + "' has " +
                                       std::to_string(c.mean_projection.size()) + " layers, expected " +
                                       std::to_string(layers));
        }
    }
    std::string out = "layer";
    for (const auto& c : curves) out += ',' + csv_field(c.checkpoint_tag);
    for (std::size_t i = 1; i < curves.size(); ++i) {
        out += ',' + csv_field("delta_" + curves[i].checkpoint_tag);
    }
    out += '\n';
    for (std::size_t l = 0; l < layers; ++l) {
        out += std::to_string(l);
        for (const auto& c : curves) out += ',' + format_fixed(c.mean_projection[l], 6);
        for (std::size_t i = 1; i < curves.size(); ++i) {
            out += ',' + format_fixed(curves[i].mean_projection[l] - curves[0].mean_projection[l], 6);
        }
        out += '\n';
    }
    return out;
}

}  // namespace proxsafe
