#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advkit/errors.hpp"

namespace advkit {

// Inputs live in [0,1]^d, labels in {0..C-1}. Samples are stored row-major;
// synthetic data interleaves classes round-robin so every prefix is balanced.
struct Dataset {
    std::size_t dim = 0;
    std::size_t classes = 0;
    std::vector<float> inputs;  // size() == size * dim
    std::vector<int> labels;
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::span<const float> sample(std::size_t i) const {
        return std::span<const float>(inputs).subspan(i * dim, dim);
    }
    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(classes, 0);
        for (int y : labels) counts[static_cast<std::size_t>(y)]++;
        return counts;
    }
};

// Gaussian blobs around per-class means drawn from the seed, clamped to the
// domain. spread == 0 collapses each class onto its mean.
Dataset generate_synthetic(std::size_t classes, std::size_t dim, std::size_t samples_per_class,
                           double spread, std::uint64_t seed);

// Standard CIFAR-10 binary batch: 3073-byte records, 1 label byte then
// 3072 pixel bytes (1024 R, 1024 G, 1024 B, row-major 32x32). Pixels are
// scaled to [0,1] by division by 255.
Dataset read_cifar10_binary(const std::string& path);

} // namespace advkit
