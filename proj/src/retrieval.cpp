#include "ragattack/retrieval.hpp"

#include <cmath>

#include "ragattack/text.hpp"

namespace ragattack {

std::vector<std::string> RetrievalResult::ids() const {
    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (const auto& r : ranked) out.push_back(r.doc_id);
    return out;
}

Bm25Index::Bm25Index(const CorpusStore& store, Bm25Params params) : store_(&store), params_(params) {
    const auto& docs = store.documents();
    doc_len_.reserve(docs.size());
    std::size_t total = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        auto toks = text::word_tokens(docs[d].text);
        doc_len_.push_back(toks.size());
        total += toks.size();
        std::unordered_map<std::string, std::size_t> tf;
        for (auto& t : toks) ++tf[std::move(t)];
        for (auto& [term, count] : tf) postings_[term].push_back({d, count});
    }
    avg_len_ = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
    const double n = static_cast<double>(docs.size());
    for (const auto& [term, plist] : postings_) {
        const double df = static_cast<double>(plist.size());
        idf_[term] = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    }
}

double Bm25Index::term_weight(double idf, std::size_t tf, std::size_t doc) const {
    const double f = static_cast<double>(tf);
    // avg_len_ is 0 only when every document tokenizes to nothing; length
    // normalization then degenerates to 1.
    const double rel_len = avg_len_ > 0.0 ? static_cast<double>(doc_len_[doc]) / avg_len_ : 1.0;
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * rel_len);
    return idf * (f * (params_.k1 + 1.0)) / (f + norm);
}

double Bm25Index::idf(std::string_view term) const {
    auto it = idf_.find(std::string(term));
    return it == idf_.end() ? 0.0 : it->second;
}

Eigen::VectorXd Bm25Index::scores(std::string_view query) const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(doc_len_.size()));
    for (const auto& term : text::word_tokens(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double w = idf_.at(term);
        for (const auto& p : it->second) s(static_cast<Eigen::Index>(p.doc)) += term_weight(w, p.tf, p.doc);
    }
    return s;
}

double Bm25Index::score(std::string_view query, std::string_view doc_id) const {
    const std::size_t d = store_->index_of(doc_id);
    double total = 0.0;
    for (const auto& term : text::word_tokens(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        for (const auto& p : it->second)
            if (p.doc == d) total += term_weight(idf_.at(term), p.tf, d);
    }
    return total;
}

RetrievalResult Bm25Index::retrieve(std::string_view query, std::size_t k) const {
    return rank_top_k(scores(query), *store_, k);
}

Bm25Index build_bm25_index(const CorpusStore& store, Bm25Params params) {
    if (store.empty()) throw InvalidInputError("cannot index an empty store");
    if (!(params.k1 > 0.0)) throw InvalidInputError("bm25 k1 must be > 0");
    if (params.b < 0.0 || params.b > 1.0) throw InvalidInputError("bm25 b must be in [0, 1]");
    return Bm25Index(store, params);
}

}  // namespace ragattack
