#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "proxsafe/emb_io.hpp"
#include "proxsafe/refusal_probe.hpp"

namespace fixture {

inline std::vector<float> gaussian(std::size_t count, std::mt19937_64& rng, float scale = 1.0f) {
    std::normal_distribution<float> g(0.0f, scale);
    std::vector<float> v(count);
    for (auto& x : v) x = g(rng);
    return v;
}

inline proxsafe::EmbeddingMatrix random_matrix(std::size_t rows, std::size_t dim, std::mt19937_64& rng,
                                               proxsafe::Axis axis = proxsafe::Axis::semantic) {
    return proxsafe::EmbeddingMatrix(rows, dim, gaussian(rows * dim, rng), proxsafe::AxisTag{axis, "test"});
}

inline proxsafe::SampleManifest manifest(std::size_t n, const std::string& prefix,
                                         proxsafe::Label label = proxsafe::Label::benign,
                                         const std::string& dataset = "synthetic") {
    proxsafe::SampleManifest m;
    for (std::size_t i = 0; i < n; ++i) {
        m.entries.push_back({prefix + std::to_string(i), prefix + " text " + std::to_string(i), dataset, label});
    }
    return m;
}

// Activations with Gaussian noise (scale `noise`) where refused samples are
// shifted by +shift * u_l along a random unit u_l at layers >= first_signal.
// Refused samples come first: ids r0.., then c0...
struct PlantedProbe {
    proxsafe::LayerActivations acts;
    proxsafe::RefusalSplit split;
    std::vector<std::vector<double>> planted;  // u_l per layer
};

inline PlantedProbe planted_probe(std::size_t layers, std::size_t refused, std::size_t complied,
                                  std::size_t dim, std::size_t first_signal, double shift, float noise,
                                  std::mt19937_64& rng, const std::string& tag = "pretrained") {
    PlantedProbe p;
    p.acts.checkpoint_tag = tag;
    for (std::size_t i = 0; i < refused; ++i) {
        p.acts.sample_ids.push_back("r" + std::to_string(i));
        p.split.refused_ids.push_back(p.acts.sample_ids.back());
    }
    for (std::size_t i = 0; i < complied; ++i) {
        p.acts.sample_ids.push_back("c" + std::to_string(i));
        p.split.complied_ids.push_back(p.acts.sample_ids.back());
    }
    const std::size_t n = refused + complied;
    for (std::size_t l = 0; l < layers; ++l) {
        auto u = gaussian(dim, rng);
        double norm = 0;
        for (float v : u) norm += double(v) * v;
        std::vector<double> unit;
        for (float v : u) unit.push_back(v / std::sqrt(norm));
        auto data = gaussian(n * dim, rng, noise);
        if (l >= first_signal) {
            for (std::size_t i = 0; i < refused; ++i)
                for (std::size_t k = 0; k < dim; ++k) data[i * dim + k] += static_cast<float>(shift * unit[k]);
        }
        p.acts.layers.emplace_back(n, dim, std::move(data), proxsafe::AxisTag{proxsafe::Axis::internal, tag});
        p.planted.push_back(std::move(unit));
    }
    return p;
}

// Same samples and planted directions, new noise, shift along u_l scaled per layer.
inline proxsafe::LayerActivations replant(const PlantedProbe& base, std::size_t refused, double shift,
                                          std::size_t first_signal, float noise, std::mt19937_64& rng,
                                          const std::string& tag) {
    proxsafe::LayerActivations acts;
    acts.checkpoint_tag = tag;
    acts.sample_ids = base.acts.sample_ids;
    const std::size_t n = acts.sample_ids.size();
    for (std::size_t l = 0; l < base.acts.layer_count(); ++l) {
        const std::size_t dim = base.acts.dim();
        auto data = gaussian(n * dim, rng, noise);
        if (l >= first_signal) {
            for (std::size_t i = 0; i < refused; ++i)
                for (std::size_t k = 0; k < dim; ++k)
                    data[i * dim + k] += static_cast<float>(shift * base.planted[l][k]);
        }
        acts.layers.emplace_back(n, dim, std::move(data), proxsafe::AxisTag{proxsafe::Axis::internal, tag});
    }
    return acts;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "proxsafe-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) std::abort();
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace fixture
