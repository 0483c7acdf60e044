#include "proxsafe/emb_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "proxsafe/error.hpp"
#include "proxsafe/io_util.hpp"

namespace proxsafe {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'E', 'M', 'B', '1'};
constexpr double kUnitNormTolerance = 1e-4;

std::uint32_t load_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
    p[2] = static_cast<std::uint8_t>(v >> 16);
    p[3] = static_cast<std::uint8_t>(v >> 24);
}

[[noreturn]] void format_error(std::string_view source, std::size_t offset, const std::string& what) {
    fail(ErrorKind::format,
         std::string(source) + ": " + what + " at byte offset " + std::to_string(offset));
}

double norm_of(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(sum);
}

}  // namespace

std::string_view to_string(Axis axis) noexcept {
    switch (axis) {
        case Axis::semantic: return "semantic";
        case Axis::acoustic: return "acoustic";
        case Axis::mixed: return "mixed";
        case Axis::internal: return "internal";
    }
    return "unknown";
}

Axis parse_axis(std::string_view name) {
    for (Axis a : {Axis::semantic, Axis::acoustic, Axis::mixed, Axis::internal}) {
        if (to_string(a) == name) return a;
    }
    fail(ErrorKind::parameter, "unknown axis '" + std::string(name) +
                                   "' (expected semantic, acoustic, mixed or internal)");
}

std::string_view to_string(Label label) noexcept {
    return label == Label::benign ? "benign" : "harmful";
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data,
                                 AxisTag axis, bool normalized)
    : rows_(rows), dim_(dim), data_(std::move(data)), axis_(std::move(axis)), normalized_(normalized) {
    if (rows_ == 0 || dim_ == 0) {
        fail(ErrorKind::shape, "embedding matrix must have rows >= 1 and dim >= 1 (got " +
                                   std::to_string(rows_) + "x" + std::to_string(dim_) + ")");
    }
    if (data_.size() != rows_ * dim_) {
        fail(ErrorKind::shape, "embedding data holds " + std::to_string(data_.size()) +
                                   " values, expected " + std::to_string(rows_ * dim_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            fail(ErrorKind::format, "non-finite value at row " + std::to_string(i / dim_) +
                                        ", column " + std::to_string(i % dim_));
        }
    }
    if (normalized_) {
        for (std::size_t r = 0; r < rows_; ++r) {
            double n = norm_of(row(r));
            if (std::abs(n - 1.0) > kUnitNormTolerance) {
                fail(ErrorKind::shape, "row " + std::to_string(r) + " has norm " +
                                           format_double(n) + " but matrix is flagged normalized");
            }
        }
    }
}

EmbeddingMatrix EmbeddingMatrix::with_axis(AxisTag axis) const {
    auto copy = *this;
    copy.axis_ = std::move(axis);
    return copy;
}

std::vector<std::uint8_t> encode_matrix(const EmbeddingMatrix& m) {
    if (m.rows() > UINT32_MAX || m.dim() > UINT32_MAX) {
        fail(ErrorKind::shape, "matrix too large for EMB1 (rows and dim must fit in 32 bits)");
    }
    std::vector<std::uint8_t> out(kEmb1HeaderBytes + m.data().size() * 4);
    std::memcpy(out.data(), kMagic.data(), kMagic.size());
    out[4] = kEmb1Version;
    out[5] = static_cast<std::uint8_t>(m.axis().axis);
    out[6] = 0;
    out[7] = 0;
    store_u32(out.data() + 8, static_cast<std::uint32_t>(m.rows()));
    store_u32(out.data() + 12, static_cast<std::uint32_t>(m.dim()));
    std::uint8_t* p = out.data() + kEmb1HeaderBytes;
    for (float v : m.data()) {
        store_u32(p, std::bit_cast<std::uint32_t>(v));
        p += 4;
    }
    return out;
}

EmbeddingMatrix decode_matrix(std::span<const std::uint8_t> bytes, std::string_view source) {
    if (bytes.size() < kEmb1HeaderBytes) {
        format_error(source, bytes.size(), "truncated header (" + std::to_string(bytes.size()) +
                                               " of 16 bytes)");
    }
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        format_error(source, 0, "bad magic (expected \"EMB1\")");
    }
    if (bytes[4] != kEmb1Version) {
        format_error(source, 4, "unsupported format version " + std::to_string(bytes[4]));
    }
    if (bytes[5] > 3) {
        format_error(source, 5, "invalid axis tag " + std::to_string(bytes[5]));
    }
    if (bytes[6] != 0 || bytes[7] != 0) {
        format_error(source, bytes[6] != 0 ? 6 : 7, "reserved byte is not zero");
    }
    const std::uint64_t rows = load_u32(bytes.data() + 8);
    const std::uint64_t dim = load_u32(bytes.data() + 12);
    if (rows == 0) format_error(source, 8, "row count is zero");
    if (dim == 0) format_error(source, 12, "dim is zero");

    const std::uint64_t expected = rows * dim * 4;
    const std::uint64_t payload = bytes.size() - kEmb1HeaderBytes;
    if (payload < expected) {
        format_error(source, bytes.size(),
                     "truncated payload: header declares " + std::to_string(rows) + "x" +
                         std::to_string(dim) + " (" + std::to_string(expected) +
                         " bytes) but only " + std::to_string(payload) + " bytes follow");
    }
    if (payload > expected) {
        format_error(source, kEmb1HeaderBytes + expected,
                     std::to_string(payload - expected) + " trailing bytes after payload");
    }

    std::vector<float> data(rows * dim);
    const std::uint8_t* p = bytes.data() + kEmb1HeaderBytes;
    for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
        float v = std::bit_cast<float>(load_u32(p));
        if (!std::isfinite(v)) {
            format_error(source, kEmb1HeaderBytes + i * 4,
                         std::string(std::isnan(v) ? "NaN" : "Inf") + " value");
        }
        data[i] = v;
    }
    AxisTag axis{static_cast<Axis>(bytes[5]), {}};
    return EmbeddingMatrix(rows, dim, std::move(data), std::move(axis));
}

EmbeddingMatrix read_matrix(const std::filesystem::path& path) {
    return decode_matrix(read_binary_file(path), path.string());
}

void write_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path) {
    write_binary_file(path, encode_matrix(m));
}

std::string manifest_line(const ManifestEntry& entry) {
    nlohmann::ordered_json obj;
    obj["id"] = entry.id;
    obj["text"] = entry.text ? nlohmann::ordered_json(*entry.text) : nlohmann::ordered_json(nullptr);
    obj["dataset"] = entry.dataset;
    obj["label"] = std::string(to_string(entry.label));
    return obj.dump();
}

SampleManifest read_manifest(const std::filesystem::path& path) {
    SampleManifest man;
    for_each_jsonl(path, [&](const nlohmann::json& obj, std::size_t line) {
        auto where = [&] { return path.string() + ":" + std::to_string(line) + ": "; };
        ManifestEntry e;
        if (!obj.contains("id") || !obj["id"].is_string() || obj["id"].get<std::string>().empty()) {
            fail(ErrorKind::format, where() + "missing or empty string field 'id'");
        }
        e.id = obj["id"].get<std::string>();
        if (auto it = obj.find("text"); it != obj.end() && !it->is_null()) {
            e.text = it->get<std::string>();
        }
        if (auto it = obj.find("dataset"); it != obj.end() && !it->is_null()) {
            e.dataset = it->get<std::string>();
        }
        if (!obj.contains("label") || !obj["label"].is_string()) {
            fail(ErrorKind::format, where() + "missing string field 'label'");
        }
        auto label = obj["label"].get<std::string>();
        if (label == "benign") {
            e.label = Label::benign;
        } else if (label == "harmful") {
            e.label = Label::harmful;
        } else {
            fail(ErrorKind::format, where() + "label must be 'benign' or 'harmful', got '" + label + "'");
        }
        man.entries.push_back(std::move(e));
    });
    return man;
}

void write_manifest(const SampleManifest& manifest, const std::filesystem::path& path) {
    std::string out;
    for (const auto& e : manifest.entries) {
        out += manifest_line(e);
        out += '\n';
    }
    write_text_file(path, out);
}

AlignedSet align_manifest(EmbeddingMatrix m, SampleManifest man) {
    if (man.size() != m.rows()) {
        fail(ErrorKind::alignment, "manifest has " + std::to_string(man.size()) +
                                       " entries but matrix has " + std::to_string(m.rows()) + " rows");
    }
    std::unordered_set<std::string_view> seen;
    seen.reserve(man.size());
    for (const auto& e : man.entries) {
        if (!seen.insert(e.id).second) {
            fail(ErrorKind::alignment, "duplicate manifest id \"" + e.id + "\"");
        }
    }
    return AlignedSet{std::move(m), std::move(man)};
}

std::vector<float> l2_normalize(std::span<const float> v) {
    const double n = norm_of(v);
    if (!(n > 0.0)) fail(ErrorKind::degenerate, "cannot normalize a zero vector");
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(v[i]) / n);
    }
    return out;
}

std::vector<float> pool_frames(std::span<const float> frames, std::size_t dim) {
    if (dim == 0 || frames.empty() || frames.size() % dim != 0) {
        fail(ErrorKind::shape, "frame block of " + std::to_string(frames.size()) +
                                   " values is not a whole number of T>=1 frames of dim " +
                                   std::to_string(dim));
    }
    const std::size_t count = frames.size() / dim;
    std::vector<double> sum(dim, 0.0);
    for (std::size_t t = 0; t < count; ++t) {
        for (std::size_t d = 0; d < dim; ++d) sum[d] += frames[t * dim + d];
    }
    double sq = 0.0;
    for (auto& s : sum) {
        s /= static_cast<double>(count);
        sq += s * s;
    }
    const double n = std::sqrt(sq);
    if (!(n > 0.0)) fail(ErrorKind::degenerate, "mean-pooled frame vector is zero; cannot normalize");
    std::vector<float> out(dim);
    for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(sum[d] / n);
    return out;
}

EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m) {
    std::vector<float> out(m.data().size());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        const double n = norm_of(row);
        if (!(n > 0.0)) {
            fail(ErrorKind::degenerate, "row " + std::to_string(r) + " has zero norm");
        }
        for (std::size_t d = 0; d < m.dim(); ++d) {
            out[r * m.dim() + d] = static_cast<float>(static_cast<double>(row[d]) / n);
        }
    }
    return EmbeddingMatrix(m.rows(), m.dim(), std::move(out), m.axis(), true);
}

CenteringResult center(const EmbeddingMatrix& benign, const EmbeddingMatrix& harmful) {
    if (benign.dim() != harmful.dim()) {
        fail(ErrorKind::shape, "cannot center: benign dim " + std::to_string(benign.dim()) +
                                   " != harmful dim " + std::to_string(harmful.dim()));
    }
    const std::size_t dim = benign.dim();
    std::vector<double> mean(dim, 0.0);
    for (const auto* m : {&benign, &harmful}) {
        for (std::size_t r = 0; r < m->rows(); ++r) {
            auto row = m->row(r);
            for (std::size_t d = 0; d < dim; ++d) mean[d] += row[d];
        }
    }
    const auto total = static_cast<double>(benign.rows() + harmful.rows());
    for (auto& v : mean) v /= total;

    auto shift = [&](const EmbeddingMatrix& m) {
        std::vector<float> out(m.data().size());
        auto src = m.data();
        for (std::size_t i = 0; i < src.size(); ++i) {
            out[i] = static_cast<float>(static_cast<double>(src[i]) - mean[i % dim]);
        }
        return EmbeddingMatrix(m.rows(), dim, std::move(out), m.axis(), false);
    };
    return CenteringResult{shift(benign), shift(harmful), std::move(mean)};
}

}  // namespace proxsafe
