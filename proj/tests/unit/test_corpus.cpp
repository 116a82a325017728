#include <gtest/gtest.h>

#include <set>

#include "ragattack/corpus.hpp"
#include "ragattack/errors.hpp"
#include "ragattack/text.hpp"
#include "temp_dir.hpp"

using namespace ragattack;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

std::string words(std::size_t n, const std::string& prefix = "w") {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += prefix + std::to_string(i);
    }
    return s;
}

Document poison(std::string id) {
    Document d;
    d.doc_id = std::move(id);
    d.text = "the answer is wrong";
    d.origin = Origin::paradox;
    return d;
}

}  // namespace

TEST(Corpus, IngestTwoLines) {
    TempDir dir;
    write_file(dir / "c.jsonl", "{\"id\":\"d1\",\"text\":\"a b\"}\n{\"id\":\"d2\",\"text\":\"c\",\"title\":\"T\"}\n");
    auto store = ingest_corpus(dir / "c.jsonl");
    ASSERT_EQ(store.size(), 2u);
    EXPECT_EQ(store.at("d2").title, "T");
    EXPECT_FALSE(store.at("d1").poisoned());
}

TEST(Corpus, MissingTextNamesLine) {
    TempDir dir;
    write_file(dir / "c.jsonl", "{\"id\":\"d1\"}\n");
    try {
        ingest_corpus(dir / "c.jsonl");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
        EXPECT_NE(std::string(e.what()).find("text"), std::string::npos);
    }
}

TEST(Corpus, MalformedJsonNamesLine) {
    TempDir dir;
    write_file(dir / "c.jsonl", "{\"id\":\"d1\",\"text\":\"a\"}\n\n{oops\n");
    try {
        ingest_corpus(dir / "c.jsonl");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Corpus, DuplicateIdInFileConflicts) {
    TempDir dir;
    write_file(dir / "c.jsonl", "{\"id\":\"d1\",\"text\":\"a\"}\n{\"id\":\"d1\",\"text\":\"b\"}\n");
    EXPECT_THROW(ingest_corpus(dir / "c.jsonl"), ConflictError);
}

TEST(Corpus, ThousandDocs) {
    TempDir dir;
    std::string body;
    for (int i = 0; i < 1000; ++i) body += "{\"id\":\"d" + std::to_string(i) + "\",\"text\":\"passage " + std::to_string(i) + "\"}\n";
    write_file(dir / "c.jsonl", body);
    auto store = ingest_corpus(dir / "c.jsonl");
    EXPECT_EQ(store.size(), 1000u);
    EXPECT_EQ(store.stats().n_clean, 1000u);
}

TEST(Corpus, ChunkingLongPassage) {
    TempDir dir;
    write_file(dir / "c.jsonl", "{\"id\":\"m\",\"text\":\"" + words(1200) + "\"}\n");
    auto store = ingest_corpus(dir / "c.jsonl", CorpusFormat::jsonl, {500, 0});
    ASSERT_EQ(store.size(), 3u);
    EXPECT_EQ(text::whitespace_tokens(store.at("m_0").text).size(), 500u);
    EXPECT_EQ(text::whitespace_tokens(store.at("m_1").text).size(), 500u);
    EXPECT_EQ(text::whitespace_tokens(store.at("m_2").text).size(), 200u);
}

TEST(Corpus, ChunkOverlap) {
    auto chunks = chunk_text("t1 t2 t3 t4 t5 t6 t7", 3, 1);
    EXPECT_EQ(chunks, (std::vector<std::string>{"t1 t2 t3", "t3 t4 t5", "t5 t6 t7"}));
}

TEST(Corpus, ChunksPartitionTextWithoutOverlap) {
    for (std::size_t n : {1u, 7u, 10u, 499u, 500u, 501u, 1234u}) {
        for (std::size_t max : {1u, 3u, 50u, 500u}) {
            auto text = words(n);
            auto chunks = chunk_text(text, max, 0);
            std::vector<std::string> rejoined;
            for (const auto& c : chunks) {
                auto t = text::whitespace_tokens(c);
                EXPECT_LE(t.size(), max);
                EXPECT_NE(text.find(c), std::string::npos);
                rejoined.insert(rejoined.end(), t.begin(), t.end());
            }
            EXPECT_EQ(rejoined, text::whitespace_tokens(text)) << n << "/" << max;
        }
    }
}

TEST(Corpus, ChunkRejectsBadOverlap) {
    EXPECT_THROW(chunk_text("a b c", 0, 0), InvalidInputError);
    EXPECT_THROW(chunk_text("a b c", 3, 3), InvalidInputError);
}

TEST(Corpus, InjectProportion) {
    CorpusStore store;
    for (int i = 0; i < 995; ++i) store.add({"d" + std::to_string(i), "clean text"});
    std::vector<Document> p;
    for (int i = 0; i < 5; ++i) p.push_back(poison("p" + std::to_string(i)));
    auto st = store.inject_poison(p);
    EXPECT_EQ(st.n_clean, 995u);
    EXPECT_EQ(st.n_poisoned, 5u);
    EXPECT_DOUBLE_EQ(st.poison_proportion, 0.005);
}

TEST(Corpus, InjectReusedIdConflictsAndLeavesStoreUntouched) {
    CorpusStore store;
    store.add({"d1", "clean"});
    std::vector<Document> p{poison("p1"), poison("d1")};
    EXPECT_THROW(store.inject_poison(p), ConflictError);
    EXPECT_EQ(store.size(), 1u);
    EXPECT_EQ(store.find("p1"), nullptr);
    EXPECT_EQ(store.at("d1").text, "clean");
}

TEST(Corpus, InjectRejectsCleanOrigin) {
    CorpusStore store;
    std::vector<Document> p{{"x", "text"}};
    EXPECT_THROW(store.inject_poison(p), InvalidInputError);
}

TEST(Corpus, UnknownIdNotFound) {
    CorpusStore store;
    EXPECT_THROW(store.at("nope"), NotFoundError);
}

TEST(Corpus, ExportRoundTrip) {
    TempDir dir;
    CorpusStore store;
    store.add({"d1", "alpha beta", std::string("Title")});
    std::vector<Document> p{poison("p1")};
    p[0].source_tag = "wiki-like";
    store.inject_poison(p);
    export_corpus(store, dir / "out.jsonl");
    auto back = ingest_corpus(dir / "out.jsonl");
    EXPECT_EQ(back.documents(), store.documents());
    EXPECT_EQ(back.stats().n_poisoned, 1u);
}

TEST(Corpus, QueriesRoundTrip) {
    TempDir dir;
    QueryCase q{"q1", "Which option?", {"B"}, {{"A", "one"}, {"B", "two"}}, std::nullopt, "Paraphrased?"};
    std::vector<QueryCase> qs{q, {"q2", "Who?", {"Ann", "Anne"}, {}, "Bob", std::nullopt}};
    save_queries(qs, dir / "q.jsonl");
    EXPECT_EQ(load_queries(dir / "q.jsonl"), qs);
    EXPECT_EQ(qs[0].correct_answer_text(), "two");
}

TEST(Corpus, QueryWrongAnswerOverlappingGoldRejected) {
    TempDir dir;
    write_file(dir / "q.jsonl", "{\"id\":\"q\",\"question\":\"x?\",\"answers\":[\"Paris\"],\"wrong_answer\":\"paris\"}\n");
    EXPECT_THROW(load_queries(dir / "q.jsonl"), ParseError);
}

TEST(Text, ContentTermsDropStopwords) {
    auto t = text::content_terms("What is the capital of the Veloria capital?");
    EXPECT_EQ(t, (std::vector<std::string>{"capital", "veloria"}));
    EXPECT_EQ(text::stopwords().size(), 50u);
}

TEST(Text, OverlapIsBidirectional) {
    EXPECT_TRUE(text::overlaps("Paris", "paris,  France"));
    EXPECT_TRUE(text::overlaps("Paris, France", "PARIS"));
    EXPECT_FALSE(text::overlaps("43", "42"));
}
