#include "advkit/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "advkit/rng.hpp"

namespace advkit {

Dataset generate_synthetic(std::size_t classes, std::size_t dim, std::size_t samples_per_class,
                           double spread, std::uint64_t seed) {
    if (classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
    if (dim < 2) throw ConfigError("synthetic dataset needs dim >= 2");
    if (spread < 0.0) throw ConfigError("synthetic spread must be >= 0");

    std::vector<std::vector<double>> means(classes, std::vector<double>(dim));
    RandomStream mean_rng(derive_seed(seed, "blob-means"));
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t j = 0; j < dim; ++j) means[c][j] = mean_rng.uniform(0.15, 0.85);

    Dataset ds;
    ds.dim = dim;
    ds.classes = classes;
    ds.provenance = "synthetic(seed=" + std::to_string(seed) + ")";
    const std::size_t n = classes * samples_per_class;
    ds.inputs.resize(n * dim);
    ds.labels.resize(n);

    RandomStream noise_rng(derive_seed(seed, "blob-noise"));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % classes;  // round-robin keeps prefixes balanced
        ds.labels[i] = static_cast<int>(c);
        for (std::size_t j = 0; j < dim; ++j) {
            double v = means[c][j] + spread * noise_rng.gaussian();
            v = std::clamp(v, 0.0, 1.0);
            ds.inputs[i * dim + j] = static_cast<float>(v);
        }
    }
    return ds;
}

Dataset read_cifar10_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path + " for reading");
    const std::streamoff total = in.tellg();
    in.seekg(0);

    constexpr std::size_t kRecord = 3073;
    constexpr std::size_t kPixels = 3072;
    if (total % static_cast<std::streamoff>(kRecord) != 0)
        throw FormatError(path + ": file length " + std::to_string(total) +
                          " is not a multiple of the 3073-byte record size; last full record ends"
                          " at byte offset " +
                          std::to_string((total / kRecord) * kRecord));
    const std::size_t n = static_cast<std::size_t>(total) / kRecord;

    Dataset ds;
    ds.dim = kPixels;
    ds.classes = 10;
    ds.provenance = "cifar10(" + path + ")";
    ds.inputs.resize(n * kPixels);
    ds.labels.resize(n);

    std::vector<unsigned char> record(kRecord);
    for (std::size_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(record.data()), kRecord);
        if (in.gcount() != static_cast<std::streamsize>(kRecord))
            throw FormatError(path + ": truncated record at byte offset " +
                              std::to_string(i * kRecord));
        if (record[0] > 9)
            throw FormatError(path + ": label byte " + std::to_string(int(record[0])) +
                              " > 9 in record " + std::to_string(i));
        ds.labels[i] = record[0];
        for (std::size_t j = 0; j < kPixels; ++j)
            ds.inputs[i * kPixels + j] = static_cast<float>(record[1 + j]) / 255.0f;
    }
    return ds;
}

} // namespace advkit
