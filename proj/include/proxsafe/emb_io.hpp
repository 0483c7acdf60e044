#pragma once

// Embedding exchange format (EMB1), sample manifests, pooling, normalization
// and global-mean centering.
//
// EMB1 layout, all integers little-endian:
//   0..3   "EMB1"
//   4      format version (0x01)
//   5      axis tag (0 semantic, 1 acoustic, 2 mixed, 3 internal)
//   6..7   reserved, zero
//   8..11  row count (u32)
//   12..15 dim (u32)
//   16..   rows*dim IEEE-754 binary32 values, row-major

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace proxsafe {

inline constexpr std::uint8_t kEmb1Version = 0x01;
inline constexpr std::size_t kEmb1HeaderBytes = 16;

enum class Axis : std::uint8_t { semantic = 0, acoustic = 1, mixed = 2, internal = 3 };

std::string_view to_string(Axis axis) noexcept;
Axis parse_axis(std::string_view name);

struct AxisTag {
    Axis axis = Axis::semantic;
    std::string encoder_name;

    friend bool operator==(const AxisTag&, const AxisTag&) = default;
};

/// Row-major float32 matrix, one row per sample. Immutable once built; the
/// constructor enforces rows >= 1, dim >= 1, finite values, and unit rows when
/// `normalized` is set.
class EmbeddingMatrix {
public:
    EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data,
                    AxisTag axis = {}, bool normalized = false);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const float> data() const noexcept { return data_; }
    std::span<const float> row(std::size_t i) const noexcept {
        return {data_.data() + i * dim_, dim_};
    }
    const AxisTag& axis() const noexcept { return axis_; }
    bool normalized() const noexcept { return normalized_; }

    EmbeddingMatrix with_axis(AxisTag axis) const;

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

private:
    std::size_t rows_;
    std::size_t dim_;
    std::vector<float> data_;
    AxisTag axis_;
    bool normalized_;
};

EmbeddingMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path);

// In-memory codec; read_matrix/write_matrix are thin file wrappers around these.
std::vector<std::uint8_t> encode_matrix(const EmbeddingMatrix& m);
EmbeddingMatrix decode_matrix(std::span<const std::uint8_t> bytes,
                              std::string_view source = "<memory>");

enum class Label { benign, harmful };

std::string_view to_string(Label label) noexcept;

struct ManifestEntry {
    std::string id;
    std::optional<std::string> text;  // null for audio-only harmful sets
    std::string dataset;
    Label label = Label::benign;

    // Text if present, otherwise the id.
    const std::string& display_text() const noexcept { return text ? *text : id; }

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct SampleManifest {
    std::vector<ManifestEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    friend bool operator==(const SampleManifest&, const SampleManifest&) = default;
};

// JSON-Lines, one {"id","text","dataset","label"} object per row. Extra keys
// are ignored on read.
SampleManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const SampleManifest& manifest, const std::filesystem::path& path);
std::string manifest_line(const ManifestEntry& entry);

/// Matrix and manifest checked to describe the same rows in the same order.
struct AlignedSet {
    EmbeddingMatrix matrix;
    SampleManifest manifest;
};

AlignedSet align_manifest(EmbeddingMatrix m, SampleManifest man);

/// Mean over T frames of a T x dim block, then l2-normalized.
std::vector<float> pool_frames(std::span<const float> frames, std::size_t dim);

std::vector<float> l2_normalize(std::span<const float> v);

/// Unit-normalizes every row. Zero rows are an error naming the row.
EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m);

struct CenteringResult {
    EmbeddingMatrix centered_benign;
    EmbeddingMatrix centered_harmful;
    std::vector<double> mean;
};

/// Subtracts the mean of all N+M rows (equal weight per row) from every row.
CenteringResult center(const EmbeddingMatrix& benign, const EmbeddingMatrix& harmful);

}  // namespace proxsafe
