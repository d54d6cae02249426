#include "afs/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "afs/error.hpp"

namespace afs {

namespace {

constexpr std::int64_t kSyntheticDim = 8;
constexpr double kSyntheticSigma = 0.1;

double clamp01(double v) { return std::min(std::max(v, 0.0), 1.0); }

// Seeded Fisher-Yates.
template <typename T>
void shuffle_indices(std::vector<T>& idx, SeededRng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

// Random orthogonal 8x8 via Gram-Schmidt on seeded normals.
std::vector<double> random_rotation(SeededRng& rng, std::int64_t d) {
    std::vector<double> q(static_cast<std::size_t>(d * d));
    for (std::int64_t c = 0; c < d; ++c) {
        std::vector<double> v(static_cast<std::size_t>(d));
        for (auto& x : v) x = rng.next_normal();
        for (std::int64_t p = 0; p < c; ++p) {
            double dot = 0.0;
            for (std::int64_t r = 0; r < d; ++r) dot += v[r] * q[r * d + p];
            for (std::int64_t r = 0; r < d; ++r) v[r] -= dot * q[r * d + p];
        }
        double norm = 0.0;
        for (auto x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (std::int64_t r = 0; r < d; ++r) q[r * d + c] = v[r] / norm;
    }
    return q;
}

std::uint32_t read_be_u32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        fail_data("idx: truncated header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace

SyntheticKind synthetic_kind_from(const std::string& name) {
    if (name == "gaussians") return SyntheticKind::gaussians;
    if (name == "rings") return SyntheticKind::rings;
    fail_data("gen_synthetic: unknown kind '" + name + "' (expected gaussians or rings)");
}

Dataset gen_synthetic(SyntheticKind kind, std::int64_t n, std::uint64_t seed, double margin) {
    if (n <= 0) fail_data("gen_synthetic: n must be positive");
    Dataset ds;
    ds.dim = kSyntheticDim;
    ds.classes = 2;
    ds.inputs.resize(static_cast<std::size_t>(n * kSyntheticDim));
    ds.labels.resize(static_cast<std::size_t>(n));

    SeededRng rng(seed);
    SeededRng noise = rng.fork("noise");

    if (kind == SyntheticKind::gaussians) {
        // Class c at 0.5 + (2c-1)*margin per coordinate; the box keeps
        // inputs in [0,1] as the dataset contract requires.
        for (std::int64_t i = 0; i < n; ++i) {
            const int label = static_cast<int>(i % 2);  // balanced to +/- 1 sample
            const double center = 0.5 + (label == 1 ? margin : -margin);
            for (std::int64_t j = 0; j < kSyntheticDim; ++j)
                ds.inputs[static_cast<std::size_t>(i * kSyntheticDim + j)] =
                    clamp01(center + kSyntheticSigma * noise.next_normal());
            ds.labels[static_cast<std::size_t>(i)] = label;
        }
    } else {
        SeededRng rot_rng = rng.fork("rotation");
        const auto rot = random_rotation(rot_rng, kSyntheticDim);
        // Inner annulus = class 0, outer = class 1; radii scale with margin.
        const double r0 = 0.15 * (margin / 0.25);
        const double r1 = 0.35 * (margin / 0.25);
        for (std::int64_t i = 0; i < n; ++i) {
            const int label = static_cast<int>(i % 2);
            const double radius = (label == 0 ? r0 : r1) + 0.02 * noise.next_normal();
            const double theta = noise.next_uniform(0.0, 2.0 * std::numbers::pi);
            double plane[2] = {radius * std::cos(theta), radius * std::sin(theta)};
            for (std::int64_t j = 0; j < kSyntheticDim; ++j) {
                const double v = rot[j * kSyntheticDim + 0] * plane[0] +
                                 rot[j * kSyntheticDim + 1] * plane[1];
                ds.inputs[static_cast<std::size_t>(i * kSyntheticDim + j)] = clamp01(0.5 + v);
            }
            ds.labels[static_cast<std::size_t>(i)] = label;
        }
    }

    ds.train_idx.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) ds.train_idx[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i);
    return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::int64_t limit) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) fail_data("idx: cannot open images file " + images_path);
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) fail_data("idx: cannot open labels file " + labels_path);

    const std::uint32_t img_magic = read_be_u32(imgs, images_path);
    if (img_magic != 0x00000803u) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%08X", img_magic);
        fail_data("idx: bad images magic " + std::string(buf) + " in " + images_path +
                  " (expected 0x00000803)");
    }
    const std::uint32_t lab_magic = read_be_u32(labs, labels_path);
    if (lab_magic != 0x00000801u) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%08X", lab_magic);
        fail_data("idx: bad labels magic " + std::string(buf) + " in " + labels_path +
                  " (expected 0x00000801)");
    }

    const std::uint32_t n_imgs = read_be_u32(imgs, images_path);
    const std::uint32_t rows = read_be_u32(imgs, images_path);
    const std::uint32_t cols = read_be_u32(imgs, images_path);
    const std::uint32_t n_labs = read_be_u32(labs, labels_path);
    if (n_imgs != n_labs)
        fail_data("idx: image/label count mismatch: " + std::to_string(n_imgs) + " images vs " +
                  std::to_string(n_labs) + " labels");

    std::int64_t n = static_cast<std::int64_t>(n_imgs);
    if (limit > 0) n = std::min<std::int64_t>(n, limit);
    const std::int64_t dim = static_cast<std::int64_t>(rows) * cols;

    Dataset ds;
    ds.dim = dim;
    ds.inputs.resize(static_cast<std::size_t>(n * dim));
    ds.labels.resize(static_cast<std::size_t>(n));

    std::vector<unsigned char> row(static_cast<std::size_t>(dim));
    int max_label = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(row.data()), dim))
            fail_data("idx: truncated image data in " + images_path + " at example " +
                      std::to_string(i));
        for (std::int64_t j = 0; j < dim; ++j)
            ds.inputs[static_cast<std::size_t>(i * dim + j)] =
                static_cast<double>(row[static_cast<std::size_t>(j)]) / 255.0;
        unsigned char lab;
        if (!labs.read(reinterpret_cast<char*>(&lab), 1))
            fail_data("idx: truncated label data in " + labels_path + " at example " +
                      std::to_string(i));
        ds.labels[static_cast<std::size_t>(i)] = static_cast<int>(lab);
        max_label = std::max(max_label, static_cast<int>(lab));
    }
    ds.classes = max_label + 1;
    ds.train_idx.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) ds.train_idx[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i);
    return ds;
}

void assign_splits(Dataset& ds, double val_fraction, double test_fraction, std::uint64_t seed) {
    if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction >= 1.0)
        fail_data("assign_splits: fractions must be non-negative and sum below 1");
    const std::int64_t n = ds.size();
    std::vector<std::int32_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i);
    SeededRng rng = SeededRng(seed).fork("splits");
    shuffle_indices(order, rng);

    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    const std::size_t n_train = static_cast<std::size_t>(n) - n_test - n_val;

    ds.train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.val_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    ds.test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
}

Tensor make_batch(const Dataset& ds, const std::vector<std::int32_t>& idx, std::size_t first,
                  std::size_t count, std::vector<int>& labels_out) {
    if (first + count > idx.size()) fail_data("make_batch: index range out of bounds");
    Tensor x = Tensor::zeros({static_cast<std::int64_t>(count), ds.dim});
    labels_out.resize(count);
    for (std::size_t r = 0; r < count; ++r) {
        const auto src = static_cast<std::size_t>(idx[first + r]);
        std::copy_n(ds.inputs.data() + src * static_cast<std::size_t>(ds.dim),
                    static_cast<std::size_t>(ds.dim),
                    x.data().data() + static_cast<std::int64_t>(r) * ds.dim);
        labels_out[r] = ds.labels[src];
    }
    return x;
}

}  // namespace afs
