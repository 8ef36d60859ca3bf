// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

// Release gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mforge/decomposer.hpp"
#include "mforge/errors.hpp"
#include "mforge/judge.hpp"
#include "mforge/mock_backends.hpp"
#include "mforge/prompts.hpp"
#include "mforge/refinery.hpp"
#include "mforge/rewards.hpp"
#include "mforge/service.hpp"
#include "mforge/tag_parser.hpp"
#include "../test_support.hpp"

using namespace mforge;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
    void check(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string random_words(SplitMix64& rng, std::size_t n) {
    static const char* vocab[] = {"time", "thief", "ideas", "diamond", "river", "light", "dark", "roots", "tree",
                                  "wisdom", "love", "rose", "storm", "voice", "music", "heart", "stone", "glass",
                                  "ocean", "memory", "fire", "clock", "garden", "globe", "silver", "tide"};
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += vocab[rng.index(std::size(vocab))];
    }
    return s;
}

// --- composite ----------------------------------------------------------------------------

Outcome composite() {
    Outcome o;
    // Table row in 1e-4 units, weights in 1e-2 units, summed as integers.
    const long long values[] = {8072, 2296, 9349, 6856, 8180, 8334, 8312, 8823};
    const long long weights[] = {20, 20, 10, 10, 10, 10, 10, 10};
    long long acc = 0;
    for (int i = 0; i < 8; ++i) acc += values[i] * weights[i];
    double oracle = static_cast<double>(acc) / 1e6;

    RewardComponents c;
    c.decomposition = 0.8072;
    c.clip = 0.2296;
    c.s_presence = 0.9349;
    c.t_presence = 0.6856;
    c.m_align = 0.8180;
    c.bert_s = 0.8334;
    c.bert_t = 0.8312;
    c.bert_m = 0.8823;
    auto t0 = Clock::now();
    double total = composite_reward(c, WeightConfig{}).total();
    double elapsed = seconds_since(t0);
    o.check(std::abs(oracle - 0.70590) < 1e-12, "integer oracle disagrees with 0.70590");
    o.check(std::abs(total - 0.70590) <= 1e-6, fmt::format("total {:.8f}", total));
    o.check(elapsed < 1e-3, fmt::format("took {:.3f} ms", elapsed * 1e3));
    o.detail = o.pass ? fmt::format("total={:.6f} in {:.1f} us", total, elapsed * 1e6) : o.detail;
    return o;
}

Outcome weight_sums() {
    Outcome o;
    WeightConfig w;
    o.check(w.active_sum() == 1.0, fmt::format("base sum {:.17g}", w.active_sum()));
    w.include_grpo_extras = true;
    o.check(w.active_sum() == 1.2, fmt::format("extras sum {:.17g}", w.active_sum()));
    if (o.pass) o.detail = "1.0 and 1.2 exactly";
    return o;
}

// --- refinement loop ----------------------------------------------------------------------

std::string run_refinery_once(const std::vector<Metaphor>& metaphors, const testing::TempDir& dir,
                              std::vector<int>& selected, std::vector<int>& oracle) {
    auto b = make_mock_backends(2026);
    auto dec = std::make_shared<Decomposer>(b.llm, b.judge_for_decomposition());
    auto ev = std::make_shared<PipelineEvaluator>(b.image, std::make_shared<Judge>(b.vlm),
                                                  std::make_shared<SimilarityScorer>(b.embed));
    RefineryOptions opts;
    opts.out_dir = dir.path();
    Refinery refinery(dec, ev, b.llm, opts);
    RunWriter writer(dir / "runs.jsonl");
    auto outcomes = run_batch(refinery, metaphors, 10, GenerationParams::turbo(), WeightConfig{}, 2, &writer);

    selected.clear();
    oracle.clear();
    for (const auto& out : outcomes) {
        if (!out.run) {
            selected.push_back(-1);
            oracle.push_back(-2);
            continue;
        }
        selected.push_back(out.run->selected_index);
        int best = -1;
        double best_total = 0.0;
        for (std::size_t i = 0; i < out.run->iterations.size(); ++i) {
            const auto& it = out.run->iterations[i];
            if (!it.breakdown) continue;
            if (best < 0 || it.breakdown->total() > best_total) {
                best = static_cast<int>(i);
                best_total = it.breakdown->total();
            }
        }
        oracle.push_back(best);
    }

    std::ifstream in(dir / "runs.jsonl");
    std::string stripped;
    for (std::string line; std::getline(in, line);) {
        auto j = json::parse(line);
        j.erase("timestamp");
        stripped += j.dump() + "\n";
    }
    return stripped;
}

Outcome refinement_loop() {
    Outcome o;
    static const char* sources[] = {"thief", "lighthouse", "jungle", "river", "diamond"};
    static const char* targets[] = {"Time", "Hope", "The city", "Life", "An idea"};
    std::vector<Metaphor> metaphors;
    for (int i = 0; i < 25; ++i)
        metaphors.emplace_back(fmt::format("m{:02d}", i),
                               fmt::format("{} is a {} number {}.", targets[i % 5], sources[(i / 5) % 5], i));
    auto t0 = Clock::now();
    testing::TempDir a, b;
    std::vector<int> sel_a, oracle_a, sel_b, oracle_b;
    std::string first = run_refinery_once(metaphors, a, sel_a, oracle_a);
    std::string second = run_refinery_once(metaphors, b, sel_b, oracle_b);
    double elapsed = seconds_since(t0);
    o.check(sel_a.size() == 25, "expected 25 runs");
    for (std::size_t i = 0; i < sel_a.size(); ++i)
        o.check(sel_a[i] >= 0 && sel_a[i] == oracle_a[i], fmt::format("run {} selected {} vs scan {}", i, sel_a[i], oracle_a[i]));
    o.check(sel_a == sel_b, "selections differ between executions");
    o.check(!first.empty() && first == second, "runs.jsonl differs between executions");
    o.check(elapsed < 30.0, fmt::format("took {:.1f} s", elapsed));
    if (o.pass) o.detail = fmt::format("25 runs x 10 iterations twice in {:.2f} s", elapsed);
    return o;
}

// --- cache --------------------------------------------------------------------------------

Outcome cache_contract() {
    Outcome o;
    auto b = make_mock_backends(9);
    auto dec = std::make_shared<Decomposer>(b.llm, b.judge_for_decomposition());
    auto ev = std::make_shared<PipelineEvaluator>(b.image, std::make_shared<Judge>(b.vlm),
                                                  std::make_shared<SimilarityScorer>(b.embed));
    RewardCalculator calc(dec, ev);
    auto& image = static_cast<MockImageBackend&>(*b.image);
    auto& vlm = static_cast<MockChatBackend&>(*b.vlm);
    GenerationParams params = GenerationParams::turbo();
    auto batch = [&] {
        for (int i = 0; i < 64; ++i) {
            int u = i % 16;
            Metaphor m(fmt::format("c{}", u), fmt::format("Idea {} is a river.", u));
            Decomposition d(fmt::format("river {}", u), fmt::format("idea {}", u), "flows on");
            VisualPrompt p(fmt::format("a winding river at dawn, variant {}", u));
            calc.score_completion(make_completion_key(m, d, p, params), m, d, p, params, WeightConfig{});
        }
    };
    batch();
    std::size_t gen1 = image.calls(), vlm1 = vlm.image_calls();
    batch();
    std::size_t gen2 = image.calls() - gen1, vlm2 = vlm.image_calls() - vlm1;
    o.check(gen1 == 16 && vlm1 == 16, fmt::format("first batch: {} images, {} analyses", gen1, vlm1));
    o.check(gen2 == 0 && vlm2 == 0, fmt::format("repeat batch: {} images, {} analyses", gen2, vlm2));
    if (o.pass) o.detail = "16/16 then 0/0";
    return o;
}

// --- BERT-style scorer --------------------------------------------------------------------

BertScore bert_oracle(const EmbeddingVector& ref, const EmbeddingVector& cand) {
    auto cos = [](const std::vector<double>& x, const std::vector<double>& y) {
        double dot = 0, nx = 0, ny = 0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            dot += x[k] * y[k];
            nx += x[k] * x[k];
            ny += y[k] * y[k];
        }
        return dot / (std::sqrt(nx) * std::sqrt(ny));
    };
    double recall = 0.0, precision = 0.0;
    for (const auto& r : ref.rows()) {
        double best = -2.0;
        for (const auto& c : cand.rows()) best = std::max(best, cos(r, c));
        recall += best;
    }
    for (const auto& c : cand.rows()) {
        double best = -2.0;
        for (const auto& r : ref.rows()) best = std::max(best, cos(r, c));
        precision += best;
    }
    recall /= static_cast<double>(ref.rows().size());
    precision /= static_cast<double>(cand.rows().size());
    double f1 = 2 * precision * recall / (precision + recall);
    return {precision, recall, std::clamp(f1, 0.0, 1.0)};
}

Outcome bert_scorer() {
    Outcome o;
    auto embed = std::make_shared<MockEmbeddingBackend>();
    SplitMix64 rng(4242);
    int pairs = 0;
    double worst = 0.0;
    for (std::size_t n = 1; n <= 12; ++n)
        for (std::size_t m = 1; m <= 12; ++m)
            for (int rep = 0; rep < 4; ++rep) {
                auto ref = embed->embed(random_words(rng, n), Granularity::PerToken);
                auto cand = embed->embed(random_words(rng, m), Granularity::PerToken);
                auto got = bert_score(ref, cand);
                auto want = bert_oracle(ref, cand);
                worst = std::max({worst, std::abs(got.precision - want.precision), std::abs(got.recall - want.recall),
                                  std::abs(got.f1 - want.f1)});
                ++pairs;
            }
    o.check(pairs >= 500, "too few pairs");
    o.check(worst <= 1e-12, fmt::format("max deviation {:.3g}", worst));
    SimilarityScorer sim(embed);
    double worst_self = 0.0;
    for (int i = 0; i < 100; ++i) {
        std::string s = random_words(rng, 1 + rng.index(12));
        worst_self = std::max(worst_self, std::abs(sim.bert_similarity(s, s).value - 1.0));
    }
    o.check(worst_self <= 1e-12, fmt::format("self-similarity off by {:.3g}", worst_self));
    if (o.pass) o.detail = fmt::format("{} pairs, max deviation {:.2g}; 100 self pairs", pairs, worst);
    return o;
}

// --- advantages ---------------------------------------------------------------------------

Outcome advantages() {
    Outcome o;
    SplitMix64 rng(777);
    double worst = 0.0;
    for (int g = 0; g < 1000; ++g) {
        std::vector<double> r(1 + rng.index(16));
        for (double& x : r) x = rng.uniform(0.0, 1.2);
        auto a = group_advantages(r);
        o.check(a.size() == r.size(), "length changed");
        double sum = 0.0;
        for (double x : a) sum += x;
        worst = std::max(worst, std::abs(sum));
    }
    o.check(worst <= 1e-9, fmt::format("max |sum| {:.3g}", worst));
    if (o.pass) o.detail = fmt::format("1000 groups, max |sum| {:.2g}", worst);
    return o;
}

// --- parsers ------------------------------------------------------------------------------

Outcome parsers() {
    Outcome o;
    SplitMix64 rng(31337);
    static const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:'\"!?()-_/>&\n\t";
    int round_trips = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        TagMap m;
        std::size_t n = 1 + rng.index(6);
        while (m.size() < n) {
            std::string v;
            std::size_t len = 1 + rng.index(40);
            for (std::size_t i = 0; i < len; ++i) v += alphabet[rng.index(alphabet.size())];
            m["t" + std::to_string(rng.index(1000))] = trim(v);
        }
        std::vector<std::string> names;
        for (const auto& kv : m) names.push_back(kv.first);
        std::vector<std::string_view> views(names.begin(), names.end());
        try {
            round_trips += parse_tagged(serialize_tags(m), views) == m;
        } catch (const std::exception&) {
        }
    }
    o.check(round_trips == 1000, fmt::format("{} of 1000 round trips", round_trips));

    try {
        using testing::golden;
        auto d = parse_decomposition(golden("decomposition_reply.txt"));
        o.check(d.decomposition.source() == "Diamonds" && d.decomposition.target() == "Ideas", "decomposition exemplar");
        o.check(parse_decomposition_score(golden("decomposition_score_reply.txt")).score() == 0.8, "score exemplar");
        auto t = parse_analysis_tags(golden("analysis_tags_reply.txt"));
        o.check(t.s_presence() == 0.9 && t.t_presence() == 0.7 && t.m_align() == 0.8, "ancient tree tags");
        auto j = parse_analysis_json(golden("analysis_json_reply.txt"));
        o.check(j.s_presence() == 0.9 && j.t_presence() == 0.7 && j.m_align() == 0.8, "ancient tree json");
        o.check(parse_no_stm_analysis(golden("analysis_no_stm_reply.txt")).alignment_score() == 0.75, "no-stm exemplar");
        auto refined = strip_fences_and_quotes(golden("refinement_reply.txt"));
        o.check(!refined.empty() && refined.front() != '"' && refined.back() != '"', "refinement exemplar");
    } catch (const std::exception& e) {
        o.check(false, std::string("golden transcript threw: ") + e.what());
    }

    const std::vector<std::string> corpus = {
        "", "no tags", "<source>", "</source>", "<source>x</target>", "<source><source>x</source></source>",
        "<SOURCE>S</SOURCE>", std::string(10000, '<'), std::string(5000, '{'),
        "<decomposition_score>high</decomposition_score><explanation>e</explanation>",
        "<decomposition_score>nan</decomposition_score><explanation>e</explanation>",
        "<s_prime>a</s_prime><t_prime>b</t_prime><m_prime>c</m_prime><s_presence_score>x</s_presence_score>"
        "<t_presence_score>1</t_presence_score><meaning_alignment_score>1</meaning_alignment_score>",
        "{\"s_prime\": \"a\"", "{\"s_prime\": 1, \"t_prime\": \"b\"}", "```json\n{ broken }\n```",
        "{\"visual_description\": \"d\", \"metaphorical_alignment\": \"a\", \"alignment_score\": \"lots\"}",
    };
    const std::vector<std::function<void(const std::string&)>> fns = {
        [](const std::string& s) { parse_decomposition(s); },
        [](const std::string& s) { parse_decomposition_score(s); },
        [](const std::string& s) { parse_analysis_tags(s); },
        [](const std::string& s) { parse_analysis_json(s); },
        [](const std::string& s) { parse_no_stm_analysis(s); },
    };
    int typed = 0, total = 0;
    for (const auto& raw : corpus)
        for (const auto& fn : fns) {
            ++total;
            try {
                fn(raw);
            } catch (const Error& e) {
                switch (e.code()) {
                case ErrorCode::MissingTag:
                case ErrorCode::MalformedTag:
                case ErrorCode::UnparsableScore:
                case ErrorCode::MissingKey:
                case ErrorCode::UnparsableJson:
                    ++typed;
                    break;
                default:
                    break;
                }
            } catch (...) {
            }
        }
    o.check(typed == total, fmt::format("{} of {} malformed inputs gave typed errors", typed, total));
    if (o.pass) o.detail = fmt::format("1000 round trips, 6 exemplars, {} malformed cases typed", total);
    return o;
}

// --- service ------------------------------------------------------------------------------

Outcome service() {
    Outcome o;
    BackendSet backends = make_mock_backends(64);
    auto dec = std::make_shared<Decomposer>(backends.llm, backends.judge_for_decomposition());
    auto ev = std::make_shared<PipelineEvaluator>(backends.image, std::make_shared<Judge>(backends.vlm),
                                                  std::make_shared<SimilarityScorer>(backends.embed));
    auto calc = std::make_shared<RewardCalculator>(dec, ev);
    auto now = Clock::now();
    ServiceOptions opts;
    opts.clock = [&now] { return now; };
    RewardService svc(backends, calc, opts);

    json req{{"group_id", "acceptance"}, {"items", json::array()}};
    for (int i = 0; i < 64; ++i) {
        std::string n = std::to_string(i);
        req["items"].push_back(
            {{"metaphor_text", "Hope " + n + " is a lighthouse."},
             {"completion_raw", testing::completion("lighthouse", "hope " + n, "guides us", "a lighthouse in fog, " + n)}});
    }
    auto t0 = Clock::now();
    auto first = svc.handle_score(req.dump());
    double elapsed = seconds_since(t0);
    o.check(first.status == 200, fmt::format("status {}", first.status));
    o.check(elapsed < 1.0, fmt::format("64 items took {:.3f} s", elapsed));
    bool ordered = first.body["items"].size() == 64;
    for (std::size_t i = 0; ordered && i < 64; ++i) {
        Metaphor m("", req["items"][i]["metaphor_text"].get<std::string>());
        auto parsed = parse_completion(req["items"][i]["completion_raw"].get<std::string>());
        ordered = first.body["items"][i]["key"] ==
                  make_completion_key(m, *parsed.decomposition, *parsed.prompt, opts.default_params).digest;
    }
    o.check(ordered, "response items are not in request order");
    auto second = svc.handle_score(req.dump());
    o.check(first.body.dump() == second.body.dump(), "repeat request differs");

    o.check(svc.handle_health().body["status"] == "ok", "health not ok with all backends up");
    static_cast<MockImageBackend&>(*backends.image).set_available(false);
    now += std::chrono::seconds(6);
    auto degraded = svc.handle_health().body;
    o.check(degraded["status"] == "degraded", "health did not degrade");
    o.check(degraded["backend_reachability"]["image"] == false && degraded["backend_reachability"]["llm"] == true,
            "reachability map wrong");
    if (o.pass) o.detail = fmt::format("64 items in {:.3f} s, idempotent, health degrades", elapsed);
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"composite reward 0.70590 +/- 1e-6, < 1 ms", composite},
        {"weight sums 1.0 and 1.2 exactly", weight_sums},
        {"refinement loop argmax and reproducibility, < 30 s", refinement_loop},
        {"cache contract 16/16 then 0", cache_contract},
        {"BERT-style scorer vs brute force, 1e-12", bert_scorer},
        {"group advantages sum to 0 within 1e-9", advantages},
        {"parser suite", parsers},
        {"service batch < 1 s, stable, idempotent; health", service},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("threw: ") + e.what();
        }
        std::printf("%s  %s  (%s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        failed += !o.pass;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
