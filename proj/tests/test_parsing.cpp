// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mforge/decomposer.hpp"
#include "mforge/errors.hpp"
#include "mforge/hashing.hpp"
#include "mforge/judge.hpp"
#include "mforge/prompts.hpp"
#include "mforge/tag_parser.hpp"
#include "test_support.hpp"

using namespace mforge;
using mforge::testing::golden;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidArgument;
}

std::string random_text(SplitMix64& rng, std::size_t max_len) {
    // '<' is left out so no value can open another tag.
    static const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:'\"!?()-_/>&\n\t";
    std::size_t n = 1 + rng.index(max_len);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.index(alphabet.size())];
    return trim(s);
}

} // namespace

// --- exemplars from the prompt appendix ---------------------------------------

TEST(Golden, DecompositionExemplar) {
    auto r = parse_decomposition(golden("decomposition_reply.txt"));
    EXPECT_EQ(r.decomposition.source(), "Diamonds");
    EXPECT_EQ(r.decomposition.target(), "Ideas");
    EXPECT_EQ(r.decomposition.meaning(), "Ideas are valuable, rare, and can be refined to brilliance.");
    EXPECT_EQ(r.prompt.text().rfind("A brilliant, multifaceted diamond", 0), 0u);
    EXPECT_TRUE(r.prompt.origin().is_initial());
    // The same text is shipped as the one-shot assistant turn.
    auto again = parse_decomposition(prompts::kExampleAssistant);
    EXPECT_EQ(again.decomposition, r.decomposition);
}

TEST(Golden, DecompositionScoreExemplar) {
    auto s = parse_decomposition_score(golden("decomposition_score_reply.txt"));
    EXPECT_DOUBLE_EQ(s.score(), 0.8);
    EXPECT_EQ(s.explanation(), "The decomposition is mostly correct, but the meaning could be more precise.");
    EXPECT_FALSE(s.clamped());
}

TEST(Golden, AncientTreeAnalysisTags) {
    auto a = parse_analysis_tags(golden("analysis_tags_reply.txt"));
    EXPECT_EQ(a.s_prime(), "A large, ancient tree.");
    EXPECT_EQ(a.t_prime(), "The concept of 'wisdom' is evoked by the tree's gnarled branches and deep roots.");
    EXPECT_EQ(a.m_prime(),
              "The image suggests that wisdom is something that grows over a long time and is deeply rooted.");
    EXPECT_DOUBLE_EQ(a.s_presence(), 0.9);
    EXPECT_DOUBLE_EQ(a.t_presence(), 0.7);
    EXPECT_DOUBLE_EQ(a.m_align(), 0.8);
    EXPECT_TRUE(a.flags().empty());
}

TEST(Golden, AnalysisJsonDialectMatchesTagDialect) {
    auto j = parse_analysis_json(golden("analysis_json_reply.txt"));
    auto t = parse_analysis_tags(golden("analysis_tags_reply.txt"));
    EXPECT_EQ(j.s_prime(), t.s_prime());
    EXPECT_EQ(j.t_prime(), t.t_prime());
    EXPECT_EQ(j.m_prime(), t.m_prime());
    EXPECT_DOUBLE_EQ(j.s_presence(), 0.9);
    EXPECT_DOUBLE_EQ(j.t_presence(), 0.7);
    EXPECT_DOUBLE_EQ(j.m_align(), 0.8);
}

TEST(Golden, AnalysisWithoutStm) {
    auto a = parse_no_stm_analysis(golden("analysis_no_stm_reply.txt"));
    EXPECT_EQ(a.visual_description(), "A gnarled oak with deep roots under a dusk sky.");
    EXPECT_DOUBLE_EQ(a.alignment_score(), 0.75);
}

TEST(Golden, RefinementReplyLosesQuotes) {
    std::string s = strip_fences_and_quotes(golden("refinement_reply.txt"));
    EXPECT_EQ(s.front(), 'A');
    EXPECT_EQ(s.back(), '.');
}

// --- tag grammar ------------------------------------------------------------------

TEST(Tags, FirstOccurrenceWinsAndContentIsTrimmed) {
    std::string raw = "noise <a>  one </a> <a>two</a>";
    std::string content;
    EXPECT_EQ(probe_tag(raw, "a", &content), TagStatus::Present);
    EXPECT_EQ(content, "one");
}

TEST(Tags, MissingAndMalformedAreTyped) {
    static constexpr std::string_view need[] = {"a", "b"};
    EXPECT_EQ(code_of([] { parse_tagged("<a>x</a>", need); }), ErrorCode::MissingTag);
    EXPECT_EQ(code_of([] { parse_tagged("<a>x</a><b>open", need); }), ErrorCode::MalformedTag);
    EXPECT_EQ(code_of([] { parse_tagged("<a>x<a>y</a></a><b>z</b>", need); }), ErrorCode::MalformedTag);
    try {
        parse_tagged("<a>x</a>", need);
    } catch (const Error& e) {
        EXPECT_EQ(e.detail(), "b");
    }
}

TEST(Tags, RoundTripOnRandomMaps) {
    SplitMix64 rng(20260101);
    for (int trial = 0; trial < 1000; ++trial) {
        TagMap m;
        std::size_t n = 1 + rng.index(6);
        while (m.size() < n) {
            std::string name = "t" + std::to_string(rng.index(1000));
            std::string value = random_text(rng, 40);
            m[name] = value;
        }
        std::vector<std::string> names;
        for (const auto& [k, v] : m) names.push_back(k);
        std::vector<std::string_view> views(names.begin(), names.end());
        ASSERT_EQ(parse_tagged(serialize_tags(m), views), m) << "trial " << trial;
    }
}

TEST(Tags, MalformedCorpusNeverEscapesAsUntypedError) {
    const std::vector<std::string> corpus = {
        "",
        "no tags at all",
        "<source>",
        "</source>",
        "<source>x</target>",
        "<source><source>x</source></source>",
        "<reasoning>r</reasoning><source>S</source><target>T</target><intended_meaning></intended_meaning>"
        "<visual_prompt>p</visual_prompt>",
        "<SOURCE>S</SOURCE>",
        "<source>S</source><target>T</target><intended_meaning>M</intended_meaning><visual_prompt>p",
        std::string(10000, '<'),
        "<decomposition_score>high</decomposition_score><explanation>e</explanation>",
        "<decomposition_score>0.8 0.9</decomposition_score><explanation>e</explanation>",
        "<decomposition_score>nan</decomposition_score><explanation>e</explanation>",
        "<decomposition_score>inf</decomposition_score><explanation>e</explanation>",
        "<s_prime>a</s_prime><t_prime>b</t_prime><m_prime>c</m_prime><s_presence_score>x</s_presence_score>"
        "<t_presence_score>1</t_presence_score><meaning_alignment_score>1</meaning_alignment_score>",
        "{\"s_prime\": \"a\"",
        "{\"s_prime\": \"a\", \"t_prime\": \"b\"}",
        "{\"s_prime\": \"a\", \"t_prime\": \"b\", \"m_prime\": \"c\", \"s_presence_score\": [1],"
        " \"t_presence_score\": 1, \"meaning_alignment_score\": 1}",
        "```json\n{ broken json }\n```",
    };
    using Parser = std::function<void(const std::string&)>;
    const std::vector<Parser> parsers = {
        [](const std::string& s) { parse_decomposition(s); },
        [](const std::string& s) { parse_decomposition_score(s); },
        [](const std::string& s) { parse_analysis_tags(s); },
        [](const std::string& s) { parse_analysis_json(s); },
        [](const std::string& s) { parse_no_stm_analysis(s); },
    };
    for (const auto& raw : corpus) {
        for (const auto& parse : parsers) {
            try {
                parse(raw);
            } catch (const Error& e) {
                EXPECT_TRUE(e.code() == ErrorCode::MissingTag || e.code() == ErrorCode::MalformedTag ||
                            e.code() == ErrorCode::UnparsableScore || e.code() == ErrorCode::MissingKey ||
                            e.code() == ErrorCode::UnparsableJson)
                    << to_string(e.code()) << " for: " << raw.substr(0, 80);
            } catch (const std::exception& e) {
                ADD_FAILURE() << "untyped error '" << e.what() << "' for: " << raw.substr(0, 80);
            }
        }
    }
}

TEST(Scores, StrictNumbersAndClamping) {
    EXPECT_DOUBLE_EQ(parse_score(" 0.25 ", "f"), 0.25);
    EXPECT_DOUBLE_EQ(parse_score("+1", "f"), 1.0);
    EXPECT_EQ(code_of([] { parse_score("0.5abc", "f"); }), ErrorCode::UnparsableScore);
    EXPECT_EQ(code_of([] { parse_score("", "f"); }), ErrorCode::UnparsableScore);
    auto s = parse_decomposition_score("<decomposition_score>1.4</decomposition_score><explanation>e</explanation>");
    EXPECT_DOUBLE_EQ(s.score(), 1.0);
    EXPECT_TRUE(s.clamped());
    auto a = parse_analysis_tags(
        "<s_prime>a</s_prime><t_prime>b</t_prime><m_prime>c</m_prime><s_presence_score>-0.2</s_presence_score>"
        "<t_presence_score>0.5</t_presence_score><meaning_alignment_score>0.5</meaning_alignment_score>");
    EXPECT_DOUBLE_EQ(a.s_presence(), 0.0);
    EXPECT_TRUE(a.flags().count("clamped:s_presence_score"));
}

TEST(Analysis, EmptyPerceptionsBecomeAbsencePhrases) {
    auto a = parse_analysis_tags(
        "<s_prime></s_prime><t_prime> </t_prime><m_prime></m_prime><s_presence_score>0.1</s_presence_score>"
        "<t_presence_score>0.1</t_presence_score><meaning_alignment_score>0.1</meaning_alignment_score>");
    EXPECT_EQ(a.s_prime(), "Not identified");
    EXPECT_EQ(a.t_prime(), "Not identified");
    EXPECT_EQ(a.m_prime(), "Not interpreted");
    EXPECT_TRUE(a.flags().count("empty:t_prime"));
}

TEST(Analysis, JsonAcceptsNumericStrings) {
    auto a = parse_analysis_json(
        "Here you go: {\"s_prime\": \"a {b}\", \"t_prime\": \"t\", \"m_prime\": \"m\", \"s_presence_score\": \"0.4\", "
        "\"t_presence_score\": 0.3, \"meaning_alignment_score\": \"1\"} thanks");
    EXPECT_EQ(a.s_prime(), "a {b}");
    EXPECT_DOUBLE_EQ(a.s_presence(), 0.4);
    EXPECT_DOUBLE_EQ(a.m_align(), 1.0);
}

TEST(Analysis, JsonRecordRoundTrip) {
    auto a = parse_analysis_tags(golden("analysis_tags_reply.txt"));
    auto b = vlm_analysis_from_json(to_json(a));
    EXPECT_EQ(to_json(b), to_json(a));
}

TEST(Fences, StripsFencesAndMatchingQuotes) {
    EXPECT_EQ(strip_fences_and_quotes("```\nA cat\n```"), "A cat");
    EXPECT_EQ(strip_fences_and_quotes("```text\n'A cat'\n```"), "A cat");
    EXPECT_EQ(strip_fences_and_quotes("\"A cat\""), "A cat");
    EXPECT_EQ(strip_fences_and_quotes("\"A cat"), "\"A cat");
    EXPECT_EQ(strip_fences_and_quotes("   "), "");
}

TEST(Json, FirstBalancedObjectWins) {
    auto j = extract_first_json_object("x {bad} then {\"a\": \"}\", \"b\": {\"c\": 1}} and {\"z\": 2}");
    EXPECT_EQ(j["a"], "}");
    EXPECT_EQ(j["b"]["c"], 1);
    EXPECT_EQ(code_of([] { extract_first_json_object("{\"a\": 1"); }), ErrorCode::UnparsableJson);
}
