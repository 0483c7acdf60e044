#include "proxsafe/proximity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <thread>
#include <unordered_map>

#include "distance_kernel.hpp"
#include "proxsafe/error.hpp"
#include "proxsafe/io_util.hpp"

namespace proxsafe {

namespace {

// Harmful rows per cache block; sized so a block stays around 512 KiB.
std::size_t harmful_block_rows(std::size_t dim) {
    constexpr std::size_t kBlockBytes = 512 * 1024;
    std::size_t rows = kBlockBytes / (dim * sizeof(float));
    rows -= rows % detail::kTileCols;
    return std::max<std::size_t>(rows, detail::kTileCols);
}

// Takes squared norms: sqrt(x * x) == x in IEEE arithmetic, so a row paired
// with itself (or its negation) lands exactly on 0 (or 2).
inline double cosine_from(double dot, double sq_norm_a, double sq_norm_b) {
    return std::clamp(1.0 - dot / std::sqrt(sq_norm_a * sq_norm_b), 0.0, 2.0);
}

double sq_norm(const float* row, std::size_t dim) {
    return detail::dot(row, row, dim);
}

// Processes benign rows [first, last) against every harmful row, writing
// running minima straight into `out`.
void scan_chunk(const EmbeddingMatrix& benign, const EmbeddingMatrix& harmful,
                std::span<const double> harmful_sq_norms, std::size_t first, std::size_t last,
                std::span<NearestHarmful> out) {
    using detail::kTileCols;
    using detail::kTileRows;
    const std::size_t dim = benign.dim();
    const std::size_t m = harmful.rows();
    const std::size_t block = harmful_block_rows(dim);
    const float* bdata = benign.data().data();
    const float* hdata = harmful.data().data();

    for (std::size_t i = first; i < last; ++i) {
        out[i] = NearestHarmful{std::numeric_limits<double>::infinity(), 0};
    }

    double dots[kTileRows][kTileCols];
    for (std::size_t h0 = 0; h0 < m; h0 += block) {
        const std::size_t h1 = std::min(m, h0 + block);
        for (std::size_t i0 = first; i0 < last; i0 += kTileRows) {
            const std::size_t rows_here = std::min(kTileRows, last - i0);
            const float* a[kTileRows];
            double a_sq[kTileRows];
            for (std::size_t r = 0; r < kTileRows; ++r) {
                a[r] = bdata + (i0 + std::min(r, rows_here - 1)) * dim;
                a_sq[r] = sq_norm(a[r], dim);
            }
            for (std::size_t j0 = h0; j0 < h1; j0 += kTileCols) {
                const std::size_t cols_here = std::min(kTileCols, h1 - j0);
                const float* b[kTileCols];
                for (std::size_t c = 0; c < kTileCols; ++c) {
                    b[c] = hdata + (j0 + std::min(c, cols_here - 1)) * dim;
                }
                detail::dot_tile(a, b, dim, dots);
                for (std::size_t r = 0; r < rows_here; ++r) {
                    auto& best = out[i0 + r];
                    for (std::size_t c = 0; c < cols_here; ++c) {
                        const double d = cosine_from(dots[r][c], a_sq[r], harmful_sq_norms[j0 + c]);
                        if (d < best.d_min) {
                            best.d_min = d;
                            best.index = static_cast<std::uint32_t>(j0 + c);
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

double distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::shape, "distance between vectors of dim " + std::to_string(a.size()) +
                                   " and " + std::to_string(b.size()));
    }
    const double na = sq_norm(a.data(), a.size());
    const double nb = sq_norm(b.data(), b.size());
    if (!(na > 0.0) || !(nb > 0.0)) {
        fail(ErrorKind::degenerate, "cosine distance undefined for a zero-norm vector");
    }
    return cosine_from(detail::dot(a.data(), b.data(), a.size()), na, nb);
}

std::vector<NearestHarmful> nearest_harmful(const EmbeddingMatrix& benign,
                                            const EmbeddingMatrix& harmful,
                                            const EngineOptions& options) {
    if (benign.dim() != harmful.dim()) {
        fail(ErrorKind::shape, "benign dim " + std::to_string(benign.dim()) +
                                   " does not match harmful dim " + std::to_string(harmful.dim()));
    }
    if (options.chunk_rows == 0) fail(ErrorKind::parameter, "chunk_rows must be positive");
    if (harmful.rows() > std::numeric_limits<std::uint32_t>::max()) {
        fail(ErrorKind::shape, "harmful set exceeds 2^32 rows");
    }
    const std::size_t n = benign.rows();
    const std::size_t dim = benign.dim();

    std::vector<double> harmful_sq_norms(harmful.rows());
    for (std::size_t j = 0; j < harmful.rows(); ++j) {
        harmful_sq_norms[j] = sq_norm(harmful.row(j).data(), dim);
        if (!(harmful_sq_norms[j] > 0.0)) {
            fail(ErrorKind::degenerate, "harmful row " + std::to_string(j) + " has zero norm");
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sq_norm(benign.row(i).data(), dim) > 0.0)) {
            fail(ErrorKind::degenerate, "benign row " + std::to_string(i) + " has zero norm");
        }
    }

    std::vector<NearestHarmful> out(n);
    const std::size_t chunks = (n + options.chunk_rows - 1) / options.chunk_rows;
    unsigned workers = options.workers ? options.workers : std::thread::hardware_concurrency();
    workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, chunks));

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
            const std::size_t first = c * options.chunk_rows;
            const std::size_t last = std::min(n, first + options.chunk_rows);
            scan_chunk(benign, harmful, harmful_sq_norms, first, last, out);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    return out;
}

ProximityRanking min_distances(const AlignedSet& benign, const AlignedSet& harmful,
                               const EngineOptions& options) {
    if (benign.matrix.axis().axis != harmful.matrix.axis().axis) {
        fail(ErrorKind::shape, "benign axis '" + std::string(to_string(benign.matrix.axis().axis)) +
                                   "' differs from harmful axis '" +
                                   std::string(to_string(harmful.matrix.axis().axis)) + "'");
    }
    auto nearest = nearest_harmful(benign.matrix, harmful.matrix, options);
    ProximityRanking r;
    r.axis = benign.matrix.axis();
    r.benign_count = benign.matrix.rows();
    r.harmful_count = harmful.matrix.rows();
    r.entries.reserve(nearest.size());
    for (std::size_t i = 0; i < nearest.size(); ++i) {
        r.entries.push_back(RankEntry{benign.manifest.entries[i].id, nearest[i].d_min, nearest[i].index});
    }
    return r;
}

std::string_view to_string(Direction d) noexcept {
    return d == Direction::proximate ? "proximate" : "distant";
}

Direction parse_direction(std::string_view name) {
    if (name == "proximate") return Direction::proximate;
    if (name == "distant") return Direction::distant;
    fail(ErrorKind::parameter, "unknown direction '" + std::string(name) +
                                   "' (expected proximate or distant)");
}

void FilterSpec::validate() const {
    if (k_percent < 1 || k_percent > 100) {
        fail(ErrorKind::parameter, "k_percent must be in [1, 100], got " + std::to_string(k_percent));
    }
}

std::size_t selection_count(int k_percent, std::size_t n) {
    const auto k = static_cast<std::size_t>(k_percent);
    return std::max<std::size_t>(1, k * n / 100);
}

std::vector<std::size_t> selection_order(const ProximityRanking& r, Direction direction) {
    std::vector<std::size_t> order(r.entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto& e = r.entries;
    if (direction == Direction::proximate) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return e[a].d_min != e[b].d_min ? e[a].d_min < e[b].d_min : a < b;
        });
    } else {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return e[a].d_min != e[b].d_min ? e[a].d_min > e[b].d_min : a < b;
        });
    }
    return order;
}

namespace {

SelectionResult take_prefix(const ProximityRanking& r, const std::vector<std::size_t>& order,
                            const FilterSpec& spec) {
    SelectionResult s;
    s.spec = spec;
    const std::size_t count = selection_count(spec.k_percent, r.entries.size());
    s.selected_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    s.selected_ids.reserve(count);
    for (std::size_t row : s.selected_rows) s.selected_ids.push_back(r.entries[row].benign_id);
    s.cutoff_distance = r.entries[s.selected_rows.back()].d_min;
    return s;
}

}  // namespace

SelectionResult select(const ProximityRanking& r, const FilterSpec& spec) {
    spec.validate();
    if (r.entries.empty()) fail(ErrorKind::parameter, "cannot select from an empty ranking");
    return take_prefix(r, selection_order(r, spec.direction), spec);
}

std::vector<SelectionResult> sweep(const ProximityRanking& r, std::span<const int> ks,
                                   Direction direction) {
    if (ks.empty()) fail(ErrorKind::parameter, "sweep needs at least one k");
    for (int k : ks) FilterSpec{k, direction, r.axis}.validate();
    if (r.entries.empty()) fail(ErrorKind::parameter, "cannot select from an empty ranking");
    const auto order = selection_order(r, direction);
    std::vector<SelectionResult> out;
    out.reserve(ks.size());
    for (int k : ks) out.push_back(take_prefix(r, order, FilterSpec{k, direction, r.axis}));
    return out;
}

SampleManifest rows_manifest(std::span<const std::size_t> rows, const SampleManifest& benign) {
    SampleManifest out;
    out.entries.reserve(rows.size());
    for (std::size_t row : rows) out.entries.push_back(benign.entries.at(row));
    return out;
}

SampleManifest selection_manifest(const SelectionResult& s, const SampleManifest& benign) {
    return rows_manifest(s.selected_rows, benign);
}

std::vector<std::size_t> random_baseline(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count > n) {
        fail(ErrorKind::parameter, "cannot sample " + std::to_string(count) + " of " + std::to_string(n) +
                                       " rows without replacement");
    }
    std::mt19937_64 gen(seed);
    auto below = [&gen](std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = gen();
            if (r >= threshold) return r % bound;
        }
    };
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(below(n - i));
        std::swap(perm[i], perm[j]);
    }
    perm.resize(count);
    return perm;
}

std::vector<std::size_t> proximate_ranks(const ProximityRanking& r) {
    const auto order = selection_order(r, Direction::proximate);
    std::vector<std::size_t> rank(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos + 1;
    return rank;
}

std::string ranking_jsonl(const ProximityRanking& r, const SampleManifest& harmful) {
    const auto rank = proximate_ranks(r);
    std::string out;
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        const auto& e = r.entries[i];
        nlohmann::ordered_json obj;
        obj["id"] = e.benign_id;
        // Shortest decimal that reads back as the same float32.
        obj["d_min"] = std::stod(format_float(static_cast<float>(e.d_min)));
        obj["nearest_id"] = harmful.entries.at(e.nearest_harmful).id;
        obj["rank"] = rank[i];
        out += obj.dump();
        out += '\n';
    }
    return out;
}

std::vector<ParsedRankingRow> read_ranking(const std::filesystem::path& path) {
    std::vector<ParsedRankingRow> rows;
    for_each_jsonl(path, [&](const nlohmann::json& obj, std::size_t) {
        rows.push_back(ParsedRankingRow{obj.at("id").get<std::string>(), obj.at("d_min").get<float>(),
                                        obj.at("nearest_id").get<std::string>(),
                                        obj.at("rank").get<std::size_t>()});
    });
    return rows;
}

std::size_t count_duplicate_distances(const ProximityRanking& r) {
    std::map<std::pair<double, std::uint32_t>, std::size_t> groups;
    for (const auto& e : r.entries) ++groups[{e.d_min, e.nearest_harmful}];
    std::size_t dup = 0;
    for (const auto& [key, count] : groups) {
        if (count > 1) dup += count;
    }
    return dup;
}

PairsReport nearest_pairs_report(const ProximityRanking& r, const SampleManifest& benign,
                                 const SampleManifest& harmful, std::size_t top_n,
                                 Direction direction) {
    if (benign.size() != r.entries.size()) {
        fail(ErrorKind::alignment, "benign manifest has " + std::to_string(benign.size()) +
                                       " entries but ranking has " + std::to_string(r.entries.size()));
    }
    if (harmful.size() != r.harmful_count) {
        fail(ErrorKind::alignment, "harmful manifest has " + std::to_string(harmful.size()) +
                                       " entries but ranking was built against " +
                                       std::to_string(r.harmful_count));
    }
    PairsReport report;
    report.direction = direction;
    if (top_n > r.entries.size()) {
        report.warnings.push_back("top_n " + std::to_string(top_n) + " exceeds " +
                                  std::to_string(r.entries.size()) + " benign samples; clamped");
        top_n = r.entries.size();
    }
    if (top_n == 0) return report;
    const auto order = selection_order(r, direction);
    for (std::size_t pos = 0; pos < top_n; ++pos) {
        const std::size_t i = order[pos];
        const auto& b = benign.entries[i];
        const auto& h = harmful.entries[r.entries[i].nearest_harmful];
        report.rows.push_back(PairRow{b.dataset, b.id, b.display_text(), h.id, h.display_text(),
                                      r.entries[i].d_min});
    }
    return report;
}

namespace {

std::string markdown_cell(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '|') {
            out += "\\|";
        } else if (c == '\n' || c == '\r') {
            out += ' ';
        } else {
            out += c;
        }
    }
    return out;
}

}  // namespace

std::string pairs_markdown(const PairsReport& report) {
    const bool closest = report.direction == Direction::proximate;
    std::string out = std::string("| Dataset | Benign Sample (") + (closest ? "Closest" : "Farthest") +
                      ") | Nearest Harmful Prompt | Dist. |\n|---|---|---|---|\n";
    for (const auto& row : report.rows) {
        out += "| " + markdown_cell(row.dataset) + " | " + markdown_cell(row.benign_text) + " | " +
               markdown_cell(row.harmful_text) + " | " + format_fixed(row.d_min, 3) + " |\n";
    }
    return out;
}

std::string pairs_csv(const PairsReport& report) {
    std::string out = "dataset,benign_id,benign_text,harmful_id,harmful_text,dist\n";
    for (const auto& row : report.rows) {
        out += csv_field(row.dataset) + ',' + csv_field(row.benign_id) + ',' +
               csv_field(row.benign_text) + ',' + csv_field(row.harmful_id) + ',' +
               csv_field(row.harmful_text) + ',' + format_fixed(row.d_min, 3) + '\n';
    }
    return out;
}

ShiftReport embedding_shift(const EmbeddingMatrix& before, const EmbeddingMatrix& after) {
    if (before.rows() != after.rows() || before.dim() != after.dim()) {
        fail(ErrorKind::shape, "shift needs equal shapes, got " + std::to_string(before.rows()) + "x" +
                                   std::to_string(before.dim()) + " and " +
                                   std::to_string(after.rows()) + "x" + std::to_string(after.dim()));
    }
    ShiftReport report;
    report.per_sample.reserve(before.rows());
    double sum = 0.0;
    for (std::size_t i = 0; i < before.rows(); ++i) {
        const double d = distance(before.row(i), after.row(i));
        report.per_sample.push_back(d);
        sum += d;
    }
    report.mean_shift = sum / static_cast<double>(before.rows());
    return report;
}

Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
    if (bins == 0) fail(ErrorKind::parameter, "histogram needs at least one bin");
    if (!(hi >= lo)) fail(ErrorKind::parameter, "histogram range is empty");
    Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
    const double width = hi - lo;
    for (double v : values) {
        if (v < lo || v > hi) continue;
        std::size_t b = width > 0.0 ? static_cast<std::size_t>((v - lo) / width * static_cast<double>(bins)) : 0;
        ++h.counts[std::min(b, bins - 1)];
    }
    return h;
}

Histogram histogram(std::span<const double> values, std::size_t bins) {
    if (values.empty()) return histogram(values, bins, 0.0, 0.0);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return histogram(values, bins, *lo, *hi);
}

std::string histogram_csv(const Histogram& h) {
    std::string out = "bin_lo,bin_hi,count\n";
    const double w = h.bin_width();
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out += format_fixed(h.lo + w * static_cast<double>(b), 6) + ',' +
               format_fixed(h.lo + w * static_cast<double>(b + 1), 6) + ',' +
               std::to_string(h.counts[b]) + '\n';
    }
    return out;
}

}  // namespace proxsafe
