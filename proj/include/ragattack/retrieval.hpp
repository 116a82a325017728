#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "ragattack/concurrency.hpp"
#include "ragattack/corpus.hpp"
#include "ragattack/embedding.hpp"
#include "ragattack/errors.hpp"

namespace ragattack {

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
    friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Top-k list for one query: scores non-increasing, ties by ascending doc_id.
struct RetrievalResult {
    std::string query_id;
    std::vector<ScoredDoc> ranked;
    std::size_t k = 0;

    std::vector<std::string> ids() const;
    friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

/// Ranks `scores` (aligned with store.documents()) and keeps min(k, N).
template <class Derived>
RetrievalResult rank_top_k(const Eigen::DenseBase<Derived>& scores, const CorpusStore& store, std::size_t k) {
    if (k == 0) throw InvalidInputError("k must be >= 1");
    const auto& docs = store.documents();
    std::vector<std::size_t> order(docs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t keep = std::min(k, order.size());
    auto better = [&](std::size_t a, std::size_t b) {
        double sa = static_cast<double>(scores(static_cast<Eigen::Index>(a)));
        double sb = static_cast<double>(scores(static_cast<Eigen::Index>(b)));
        if (sa != sb) return sa > sb;
        return docs[a].doc_id < docs[b].doc_id;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), better);
    RetrievalResult r;
    r.k = k;
    r.ranked.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i)
        r.ranked.push_back({docs[order[i]].doc_id, static_cast<double>(scores(static_cast<Eigen::Index>(order[i])))});
    return r;
}

/// Common read-only interface over sparse and dense indexes. Indexes are
/// immutable after build and safe to query concurrently; the store they
/// were built from must outlive them.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual RetrievalResult retrieve(std::string_view query, std::size_t k) const = 0;
    virtual const CorpusStore& store() const = 0;
    virtual std::string_view kind() const = 0;
};

struct Bm25Params {
    double k1 = 2.0;
    double b = 0.75;
};

/// Okapi BM25 over lowercased alphanumeric tokens, natural-log idf
/// ln(1 + (N - df + 0.5) / (df + 0.5)). Repeated query terms contribute once
/// per occurrence.
class Bm25Index final : public Retriever {
public:
    Bm25Index(const CorpusStore& store, Bm25Params params);

    RetrievalResult retrieve(std::string_view query, std::size_t k) const override;
    const CorpusStore& store() const override { return *store_; }
    std::string_view kind() const override { return "bm25"; }

    /// Scores for every document, aligned with store().documents().
    Eigen::VectorXd scores(std::string_view query) const;
    /// Throws NotFoundError for unknown ids.
    double score(std::string_view query, std::string_view doc_id) const;

    double idf(std::string_view term) const;
    double average_length() const noexcept { return avg_len_; }
    const Bm25Params& params() const noexcept { return params_; }

private:
    struct Posting {
        std::size_t doc;
        std::size_t tf;
    };
    double term_weight(double idf, std::size_t tf, std::size_t doc) const;

    const CorpusStore* store_;
    Bm25Params params_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::unordered_map<std::string, double> idf_;
    std::vector<std::size_t> doc_len_;
    double avg_len_ = 0.0;
};

/// Throws InvalidInputError for an empty store or out-of-range params.
Bm25Index build_bm25_index(const CorpusStore& store, Bm25Params params = {});

struct DenseBuildOptions {
    std::size_t batch_size = 32;
    /// Concurrent embedding requests during build.
    std::size_t max_in_flight = 4;
};

/// Exact inner-product index. Document vectors are stored verbatim as rows
/// of a row-major matrix; a query is embedded once and scored with one
/// matrix-vector product.
template <class Scalar = float>
class DenseIndex final : public Retriever {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    DenseIndex(const CorpusStore& store, std::shared_ptr<EmbeddingClient> embedder, Matrix vectors)
        : store_(&store), embedder_(std::move(embedder)), vectors_(std::move(vectors)) {}

    RetrievalResult retrieve(std::string_view query, std::size_t k) const override {
        return rank_top_k(scores(embed_query(query)), *store_, k);
    }
    const CorpusStore& store() const override { return *store_; }
    std::string_view kind() const override { return "dense"; }

    Vector embed_query(std::string_view query) const {
        std::string q(query);
        auto out = embedder_->embed(std::span<const std::string>(&q, 1));
        if (out.size() != 1) throw SchemaError("embedding service returned wrong number of vectors");
        if (static_cast<Eigen::Index>(out.front().size()) != dim())
            throw SchemaError("query embedding dim " + std::to_string(out.front().size()) + " != index dim " +
                              std::to_string(dim()));
        return Eigen::Map<const Eigen::VectorXf>(out.front().data(), dim()).template cast<Scalar>();
    }

    template <class Derived>
    Vector scores(const Eigen::MatrixBase<Derived>& query) const {
        return vectors_ * query;
    }

    Eigen::Index dim() const noexcept { return vectors_.cols(); }
    const Matrix& vectors() const noexcept { return vectors_; }

private:
    const CorpusStore* store_;
    std::shared_ptr<EmbeddingClient> embedder_;
    Matrix vectors_;
};

/// Embeds every document in batches. A failed batch surfaces as a
/// TransportError carrying that batch's texts; inconsistent dimensions are a
/// SchemaError.
template <class Scalar = float>
DenseIndex<Scalar> build_dense_index(const CorpusStore& store, std::shared_ptr<EmbeddingClient> embedder,
                                     const DenseBuildOptions& opts = {}) {
    if (store.empty()) throw InvalidInputError("cannot index an empty store");
    const auto& docs = store.documents();
    const std::size_t batch = std::max<std::size_t>(opts.batch_size, 1);
    const std::size_t n_batches = (docs.size() + batch - 1) / batch;
    std::vector<std::vector<std::vector<float>>> results(n_batches);

    parallel_for(n_batches, opts.max_in_flight, [&](std::size_t b) {
        std::vector<std::string> texts;
        for (std::size_t i = b * batch; i < std::min(docs.size(), (b + 1) * batch); ++i) texts.push_back(docs[i].text);
        try {
            results[b] = embedder->embed(texts);
        } catch (const TransportError& e) {
            throw TransportError(std::string("embedding batch ") + std::to_string(b) + " failed: " + e.what(),
                                 std::move(texts), e.status());
        }
        if (results[b].size() != texts.size()) throw SchemaError("embedding service returned wrong number of vectors");
    });

    const std::size_t dim = results.front().front().size();
    if (dim == 0) throw SchemaError("embedding service returned empty vectors");
    typename DenseIndex<Scalar>::Matrix m(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(dim));
    Eigen::Index row = 0;
    for (const auto& br : results) {
        for (const auto& v : br) {
            if (v.size() != dim)
                throw SchemaError("embedding dimension mismatch: " + std::to_string(dim) + " vs " +
                                  std::to_string(v.size()));
            m.row(row++) = Eigen::Map<const Eigen::RowVectorXf>(v.data(), static_cast<Eigen::Index>(dim))
                               .template cast<Scalar>();
        }
    }
    return DenseIndex<Scalar>(store, std::move(embedder), std::move(m));
}

}  // namespace ragattack
