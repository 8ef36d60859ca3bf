// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <thread>

#include "mforge/decomposer.hpp"
#include "mforge/errors.hpp"
#include "mforge/judge.hpp"
#include "mforge/mock_backends.hpp"
#include "test_support.hpp"

using namespace mforge;
using mforge::testing::completion;
using mforge::testing::golden;
using mforge::testing::ScriptedChat;

namespace {

const Metaphor kTree("tree", "An ancient tree is a silent historian.");

ImageArtifact tiny_image() {
    return MockImageBackend(1).generate(VisualPrompt("an old oak"), GenerationParams(4.5, 8, 8, 8));
}

} // namespace

TEST(Decomposer, ParsesFirstWellFormedReply) {
    auto llm = std::make_shared<ScriptedChat>(std::vector<std::string>{completion("tree", "historian", "keeps memory", "an old oak")});
    auto judge = std::make_shared<ScriptedChat>(std::vector<std::string>{golden("decomposition_score_reply.txt")});
    Decomposer dec(llm, judge);
    auto r = dec.decompose(kTree);
    EXPECT_EQ(r.decomposition.source(), "tree");
    EXPECT_EQ(r.prompt.text(), "an old oak");
    EXPECT_TRUE(r.prompt.origin().is_initial());
    EXPECT_EQ(llm->requests.size(), 1u);
}

TEST(Decomposer, ReasksOnceAfterFormatError) {
    auto llm = std::make_shared<ScriptedChat>(std::vector<std::string>{
        "Sure! The source is a tree.", completion("tree", "historian", "keeps memory", "an old oak")});
    auto judge = std::make_shared<ScriptedChat>(std::vector<std::string>{golden("decomposition_score_reply.txt")});
    Decomposer dec(llm, judge);
    auto r = dec.decompose(kTree);
    EXPECT_EQ(r.decomposition.target(), "historian");
    ASSERT_EQ(llm->requests.size(), 2u);
    EXPECT_GT(llm->requests[1].size(), llm->requests[0].size());
    EXPECT_EQ(llm->requests[1].rfind(llm->requests[0], 0), 0u);
}

TEST(Decomposer, SecondFormatErrorPropagates) {
    auto llm = std::make_shared<ScriptedChat>(std::vector<std::string>{"no tags", "still no tags"});
    auto judge = std::make_shared<ScriptedChat>(std::vector<std::string>{"<decomposition_score>0.5</decomposition_score><explanation>ok</explanation>"});
    Decomposer dec(llm, judge);
    try {
        dec.decompose(kTree);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingTag);
    }
    EXPECT_EQ(llm->requests.size(), 2u);
}

TEST(Decomposer, BackendErrorIsNotReasked) {
    auto llm = std::make_shared<ScriptedChat>(std::vector<std::string>{completion("a", "b", "c", "d")});
    llm->fail_next = 1;
    auto judge = std::make_shared<ScriptedChat>(std::vector<std::string>{"<decomposition_score>0.5</decomposition_score><explanation>ok</explanation>"});
    Decomposer dec(llm, judge);
    try {
        dec.decompose(kTree);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Transport);
        EXPECT_TRUE(e.is_backend_error());
    }
    EXPECT_EQ(llm->requests.size(), 1u);
}

TEST(Decomposer, ScoreIsMemoizedPerPair) {
    auto llm = std::make_shared<ScriptedChat>(std::vector<std::string>{""});
    auto judge = std::make_shared<ScriptedChat>(std::vector<std::string>{golden("decomposition_score_reply.txt")});
    Decomposer dec(llm, judge);
    Decomposition d("tree", "historian", "keeps memory");
    auto a = dec.score_decomposition(kTree, d);
    auto b = dec.score_decomposition(kTree, d);
    EXPECT_DOUBLE_EQ(a.score(), 0.8);
    EXPECT_DOUBLE_EQ(b.score(), 0.8);
    EXPECT_EQ(dec.judge_evaluations(), 1u);
    // Reasoning is not part of the identity.
    dec.score_decomposition(kTree, Decomposition("tree", "historian", "keeps memory", "other reasoning"));
    EXPECT_EQ(dec.judge_evaluations(), 1u);
    dec.score_decomposition(kTree, Decomposition("tree", "archivist", "keeps memory"));
    EXPECT_EQ(dec.judge_evaluations(), 2u);
    EXPECT_EQ(judge->requests.size(), 2u);
}

TEST(Decomposer, ConcurrentScoresShareOneJudgeCall) {
    auto llm = std::make_shared<ScriptedChat>(std::vector<std::string>{""});
    auto judge = std::make_shared<ScriptedChat>(std::vector<std::string>{"<decomposition_score>0.6</decomposition_score><explanation>ok</explanation>"});
    Decomposer dec(llm, judge);
    Decomposition d("tree", "historian", "keeps memory");
    std::vector<std::thread> threads;
    std::vector<double> seen(16);
    for (int i = 0; i < 16; ++i)
        threads.emplace_back([&, i] { seen[i] = dec.score_decomposition(kTree, d).score(); });
    for (auto& t : threads) t.join();
    EXPECT_EQ(dec.judge_evaluations(), 1u);
    for (double s : seen) EXPECT_DOUBLE_EQ(s, 0.6);
}

TEST(Decomposer, FailedScoreIsNotMemoized) {
    auto llm = std::make_shared<ScriptedChat>(std::vector<std::string>{""});
    auto judge = std::make_shared<ScriptedChat>(std::vector<std::string>{"<decomposition_score>0.4</decomposition_score><explanation>ok</explanation>"});
    judge->fail_next = 1;
    Decomposer dec(llm, judge);
    Decomposition d("tree", "historian", "keeps memory");
    EXPECT_THROW(dec.score_decomposition(kTree, d), Error);
    EXPECT_DOUBLE_EQ(dec.score_decomposition(kTree, d).score(), 0.4);
}

TEST(Judge, TagDialectUsesGoldenReply) {
    auto vlm = std::make_shared<ScriptedChat>(std::vector<std::string>{golden("analysis_tags_reply.txt")});
    Judge judge(vlm);
    auto a = judge.analyze_with_stm(tiny_image(), kTree, Decomposition("tree", "historian", "keeps memory"));
    EXPECT_DOUBLE_EQ(a.s_presence(), 0.9);
    EXPECT_DOUBLE_EQ(a.t_presence(), 0.7);
    EXPECT_DOUBLE_EQ(a.m_align(), 0.8);
    EXPECT_NE(vlm->requests.at(0).find("tree"), std::string::npos);
}

TEST(Judge, JsonDialectMatchesTagDialect) {
    auto vlm_tags = std::make_shared<ScriptedChat>(std::vector<std::string>{golden("analysis_tags_reply.txt")});
    auto vlm_json = std::make_shared<ScriptedChat>(std::vector<std::string>{golden("analysis_json_reply.txt")});
    Decomposition d("tree", "historian", "keeps memory");
    auto a = Judge(vlm_tags).analyze_with_stm(tiny_image(), kTree, d, AnalysisDialect::Tags);
    auto b = Judge(vlm_json).analyze_with_stm(tiny_image(), kTree, d, AnalysisDialect::Json);
    EXPECT_DOUBLE_EQ(a.s_presence(), b.s_presence());
    EXPECT_DOUBLE_EQ(a.t_presence(), b.t_presence());
    EXPECT_DOUBLE_EQ(a.m_align(), b.m_align());
}

TEST(Judge, ReasksOnMalformedAnalysis) {
    auto vlm = std::make_shared<ScriptedChat>(std::vector<std::string>{"I see a tree.", golden("analysis_tags_reply.txt")});
    Judge judge(vlm);
    auto a = judge.analyze_with_stm(tiny_image(), kTree, Decomposition("tree", "historian", "keeps memory"));
    EXPECT_DOUBLE_EQ(a.m_align(), 0.8);
    EXPECT_EQ(vlm->requests.size(), 2u);
}

TEST(Judge, WithoutStm) {
    auto vlm = std::make_shared<ScriptedChat>(std::vector<std::string>{golden("analysis_no_stm_reply.txt")});
    auto a = Judge(vlm).analyze_without_stm(tiny_image(), kTree);
    EXPECT_DOUBLE_EQ(a.alignment_score(), 0.75);
    EXPECT_NE(vlm->requests.at(0).find(kTree.text()), std::string::npos);
    EXPECT_EQ(vlm->requests.at(0).find("s_presence_score"), std::string::npos);
}

TEST(Judge, MockVlmProducesValidAnalyses) {
    auto backends = make_mock_backends(3);
    Judge judge(backends.vlm);
    for (const char* text : {"Time is a thief.", "Hope is a lighthouse.", "The city is a jungle."}) {
        Metaphor m("", text);
        Decomposer dec(backends.llm, backends.judge_for_decomposition());
        auto r = dec.decompose(m);
        auto img = backends.image->generate(r.prompt, GenerationParams(4.5, 8, 32, 32));
        auto a = judge.analyze_with_stm(img, m, r.decomposition);
        EXPECT_GE(a.s_presence(), 0.0);
        EXPECT_LE(a.s_presence(), 1.0);
        EXPECT_FALSE(a.m_prime().empty());
        auto score = dec.score_decomposition(m, r.decomposition).score();
        EXPECT_GE(score, 0.0);
        EXPECT_LE(score, 1.0);
    }
}
