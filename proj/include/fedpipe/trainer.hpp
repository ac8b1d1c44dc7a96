#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedpipe/rng.hpp"

// Desk-scale training: multinomial logistic regression on synthetic Gaussian
// blobs. The model is held as a flat float vector of d*c weights (row-major)
// followed by c biases, which is exactly the unit the wire exchanges.
namespace fedpipe {

struct ModelShape {
    unsigned feature_dim = 32;
    unsigned n_classes = 10;

    std::size_t param_count() const {
        return std::size_t{feature_dim} * n_classes + n_classes;
    }
    std::size_t weight(unsigned i, unsigned j) const {
        return std::size_t{i} * n_classes + j;
    }
    std::size_t bias(unsigned j) const {
        return std::size_t{feature_dim} * n_classes + j;
    }
};

struct Dataset {
    unsigned feature_dim = 0;
    unsigned n_classes = 0;
    std::vector<float> features;        // n x d, row-major
    std::vector<std::uint16_t> labels;  // n, in [0, c)

    std::size_t size() const { return labels.size(); }
    std::span<const float> row(std::size_t i) const {
        return {features.data() + i * feature_dim, feature_dim};
    }
};

struct HyperParams {
    unsigned epochs = 1;       // E
    unsigned batch_size = 50;  // B
    float eta = 0.1f;
    unsigned rounds = 20;  // T
    std::uint64_t seed = 1;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

namespace detail {

// Softmax probabilities for one sample; returns the log-sum-exp-normalized
// probabilities in `probs` and the linear scores in `logits`.
inline void forward(std::span<const float> w, const ModelShape& shape,
                    std::span<const float> x, double* logits, double* probs) {
    for (unsigned j = 0; j < shape.n_classes; ++j) logits[j] = w[shape.bias(j)];
    for (unsigned i = 0; i < shape.feature_dim; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const float* wrow = w.data() + shape.weight(i, 0);
        for (unsigned j = 0; j < shape.n_classes; ++j) logits[j] += xi * wrow[j];
    }
    double max = logits[0];
    for (unsigned j = 1; j < shape.n_classes; ++j) max = std::max(max, logits[j]);
    double denom = 0.0;
    for (unsigned j = 0; j < shape.n_classes; ++j) {
        probs[j] = std::exp(logits[j] - max);
        denom += probs[j];
    }
    for (unsigned j = 0; j < shape.n_classes; ++j) probs[j] /= denom;
}

}  // namespace detail

// Mean softmax cross-entropy gradient over a batch, written into `grad`
// (same layout as the parameter vector).
inline void batch_gradient(std::span<const float> w, const ModelShape& shape,
                           const Dataset& data, std::span<const std::uint32_t> batch,
                           std::span<float> grad) {
    std::fill(grad.begin(), grad.end(), 0.0f);
    std::vector<double> logits(shape.n_classes), probs(shape.n_classes);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const std::uint32_t s : batch) {
        const auto x = data.row(s);
        detail::forward(w, shape, x, logits.data(), probs.data());
        for (unsigned j = 0; j < shape.n_classes; ++j) {
            const double dz = (probs[j] - (j == data.labels[s] ? 1.0 : 0.0)) * scale;
            grad[shape.bias(j)] += static_cast<float>(dz);
            for (unsigned i = 0; i < shape.feature_dim; ++i)
                grad[shape.weight(i, j)] += static_cast<float>(dz * x[i]);
        }
    }
}

// ClientUpdate: E epochs of minibatch SGD, w <- w - eta * grad. The batch
// order is a seeded shuffle per epoch, so identical (w, shard, hp) inputs
// give bit-identical outputs.
inline std::vector<float> client_update(std::span<const float> w0, const Dataset& shard,
                                        const ModelShape& shape, const HyperParams& hp) {
    if (shard.size() == 0) throw std::invalid_argument("client_update: empty shard");
    if (w0.size() != shape.param_count())
        throw std::invalid_argument("client_update: bad parameter count");
    std::vector<float> w(w0.begin(), w0.end());
    std::vector<float> grad(w.size());
    std::vector<std::uint32_t> order(shard.size());
    std::iota(order.begin(), order.end(), 0u);
    for (unsigned e = 0; e < hp.epochs; ++e) {
        SplitMix64 rng(derive_seed(hp.seed, e));
        deterministic_shuffle(order, rng);
        for (std::size_t at = 0; at < order.size(); at += hp.batch_size) {
            const std::size_t n = std::min<std::size_t>(hp.batch_size, order.size() - at);
            batch_gradient(w, shape, shard, {order.data() + at, n}, grad);
            for (std::size_t k = 0; k < w.size(); ++k) {
                w[k] -= hp.eta * grad[k];
                if (!std::isfinite(w[k]))
                    throw std::runtime_error("client_update diverged (non-finite weight)");
            }
        }
    }
    return w;
}

inline EvalResult evaluate(std::span<const float> w, const ModelShape& shape,
                           const Dataset& testset) {
    if (testset.size() == 0) throw std::invalid_argument("evaluate: empty testset");
    std::vector<double> logits(shape.n_classes), probs(shape.n_classes);
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < testset.size(); ++s) {
        detail::forward(w, shape, testset.row(s), logits.data(), probs.data());
        const double p = std::max(probs[testset.labels[s]], 1e-300);
        loss -= std::log(p);
        unsigned best = 0;
        for (unsigned j = 1; j < shape.n_classes; ++j)
            if (probs[j] > probs[best]) best = j;
        if (best == testset.labels[s]) ++correct;
    }
    if (!std::isfinite(loss)) throw std::runtime_error("evaluate: non-finite loss");
    return {loss / static_cast<double>(testset.size()),
            static_cast<double>(correct) / static_cast<double>(testset.size())};
}

struct SyntheticData {
    Dataset train;
    Dataset test;
    std::vector<unsigned> partition;  // client id per train sample
    unsigned n_clients = 0;

    Dataset shard(unsigned client) const {
        Dataset out;
        out.feature_dim = train.feature_dim;
        out.n_classes = train.n_classes;
        for (std::size_t s = 0; s < train.size(); ++s) {
            if (partition[s] != client) continue;
            const auto x = train.row(s);
            out.features.insert(out.features.end(), x.begin(), x.end());
            out.labels.push_back(train.labels[s]);
        }
        return out;
    }
};

// Unit-variance Gaussian blobs, one per class, means at 3.0 * e_k (the
// vertices of a scaled axis-aligned simplex; requires d >= c). Samples are
// shuffled and split into equal i.i.d. shards.
inline SyntheticData gen_synthetic(std::uint64_t seed, std::size_t n_train,
                                   std::size_t n_test, unsigned d, unsigned c,
                                   unsigned n_clients) {
    if (d < c) throw std::invalid_argument("gen_synthetic: need feature_dim >= n_classes");
    if (n_clients == 0 || n_train % n_clients != 0)
        throw std::invalid_argument("gen_synthetic: n_train must divide evenly across clients");
    constexpr float kSeparation = 3.0f;

    auto fill = [&](Dataset& ds, std::size_t n, SplitMix64& rng) {
        ds.feature_dim = d;
        ds.n_classes = c;
        ds.features.resize(n * d);
        ds.labels.resize(n);
        for (std::size_t s = 0; s < n; ++s) {
            const auto label = static_cast<std::uint16_t>(s % c);
            ds.labels[s] = label;
            float* row = ds.features.data() + s * d;
            for (unsigned i = 0; i < d; ++i)
                row[i] = next_gaussian(rng) + (i == label ? kSeparation : 0.0f);
        }
    };

    SyntheticData out;
    out.n_clients = n_clients;
    Dataset raw;
    SplitMix64 train_rng(derive_seed(seed, 1));
    fill(raw, n_train, train_rng);
    SplitMix64 test_rng(derive_seed(seed, 2));
    fill(out.test, n_test, test_rng);

    // Shuffle, then deal equal contiguous shares to the clients.
    std::vector<std::uint32_t> order(n_train);
    std::iota(order.begin(), order.end(), 0u);
    SplitMix64 shuffle_rng(derive_seed(seed, 3));
    deterministic_shuffle(order, shuffle_rng);

    out.train.feature_dim = d;
    out.train.n_classes = c;
    out.train.features.resize(n_train * d);
    out.train.labels.resize(n_train);
    out.partition.resize(n_train);
    const std::size_t share = n_train / n_clients;
    for (std::size_t s = 0; s < n_train; ++s) {
        const auto src = raw.row(order[s]);
        std::copy(src.begin(), src.end(), out.train.features.begin() + s * d);
        out.train.labels[s] = raw.labels[order[s]];
        out.partition[s] = static_cast<unsigned>(s / share);
    }
    return out;
}

}  // namespace fedpipe
