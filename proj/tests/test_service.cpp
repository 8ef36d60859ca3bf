// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"

#include "mforge/errors.hpp"
#include "mforge/mock_backends.hpp"
#include "mforge/service.hpp"
#include "test_support.hpp"

using namespace mforge;
using mforge::testing::completion;

namespace {

struct Fixture {
    BackendSet backends = make_mock_backends(2);
    std::shared_ptr<Decomposer> decomposer = std::make_shared<Decomposer>(backends.llm, backends.judge_for_decomposition());
    std::shared_ptr<PipelineEvaluator> evaluator = std::make_shared<PipelineEvaluator>(
        backends.image, std::make_shared<Judge>(backends.vlm), std::make_shared<SimilarityScorer>(backends.embed));
    std::shared_ptr<RewardCalculator> calculator = std::make_shared<RewardCalculator>(decomposer, evaluator);
    std::chrono::steady_clock::time_point now{};

    ServiceOptions options() {
        ServiceOptions o;
        o.default_params = GenerationParams(4.5, 8, 32, 32);
        o.clock = [this] { return now; };
        return o;
    }
    MockImageBackend& image() { return static_cast<MockImageBackend&>(*backends.image); }
};

json item(const std::string& metaphor, const std::string& raw) {
    return json{{"metaphor_text", metaphor}, {"completion_raw", raw}};
}

json good(int v) {
    std::string n = std::to_string(v);
    return item("Hope is a lighthouse.", completion("lighthouse", "hope", "guides " + n, "a lighthouse in fog " + n));
}

} // namespace

TEST(ParseCompletion, RequiresFourNonEmptyTags) {
    auto p = parse_completion(completion("a", "b", "c", "d"));
    EXPECT_TRUE(p.ok);
    EXPECT_EQ(p.prompt->text(), "d");
    EXPECT_EQ(p.length_basis, "d");
    auto missing = parse_completion("<source>a</source><target>b</target><visual_prompt>p</visual_prompt>");
    EXPECT_FALSE(missing.ok);
    EXPECT_EQ(missing.length_basis, "p");
    auto bare = parse_completion("just words");
    EXPECT_FALSE(bare.ok);
    EXPECT_EQ(bare.length_basis, "just words");
    EXPECT_TRUE(parse_completion("<source>a</source><target>b</target><intended_meaning>c</intended_meaning>"
                                 "<visual_prompt>d</visual_prompt>")
                    .ok);
}

TEST(Service, DuplicateItemsShareOneEvaluation) {
    Fixture f;
    RewardService svc(f.backends, f.calculator, f.options());
    json req{{"items", {good(1), good(2), good(1), good(3)}}};
    auto reply = svc.handle_score(req.dump());
    ASSERT_EQ(reply.status, 200) << reply.body.dump();
    const auto& items = reply.body["items"];
    ASSERT_EQ(items.size(), 4u);
    std::set<std::string> keys;
    for (const auto& it : items) keys.insert(it["key"].get<std::string>());
    EXPECT_EQ(keys.size(), 3u);
    EXPECT_EQ(items[0]["key"], items[2]["key"]);
    EXPECT_EQ(items[0]["breakdown"], items[2]["breakdown"]);
    EXPECT_EQ(f.calculator->stats().evaluations, 3u);
    EXPECT_EQ(f.image().calls(), 3u);
    EXPECT_TRUE(reply.body["advantages"].is_null() || !reply.body.contains("advantages"));
}

TEST(Service, GroupAdvantagesAreMeanCentered) {
    Fixture f;
    RewardService svc(f.backends, f.calculator, f.options());
    json req{{"group_id", "g1"}, {"items", {good(1), good(2), good(3), good(4)}}};
    auto reply = svc.handle_score(req.dump());
    ASSERT_EQ(reply.status, 200);
    EXPECT_EQ(reply.body["group_id"], "g1");
    std::vector<double> totals;
    for (const auto& it : reply.body["items"]) totals.push_back(it["breakdown"]["total"].get<double>());
    double mean = (totals[0] + totals[1] + totals[2] + totals[3]) / 4.0;
    const auto& adv = reply.body["advantages"];
    ASSERT_EQ(adv.size(), 4u);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(adv[i].get<double>(), totals[i] - mean, 1e-12);
}

TEST(Service, ExtrasAreAlwaysOn) {
    Fixture f;
    RewardService svc(f.backends, f.calculator, f.options());
    auto reply = svc.handle_score(json{{"items", {good(1)}}}.dump());
    const auto& c = reply.body["items"][0]["breakdown"];
    EXPECT_DOUBLE_EQ(c["format"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(c["length"].get<double>(), 1.0);
}

TEST(Service, UnparsableCompletionScoresFormatAndLengthOnly) {
    Fixture f;
    RewardService svc(f.backends, f.calculator, f.options());
    auto reply = svc.handle_score(json{{"items", {item("Hope is a lighthouse.", "no tags at all")}}}.dump());
    ASSERT_EQ(reply.status, 200);
    const auto& r = reply.body["items"][0];
    EXPECT_FALSE(r["parse_ok"].get<bool>());
    EXPECT_DOUBLE_EQ(r["breakdown"]["format"].get<double>(), 0.0);
    EXPECT_NEAR(r["breakdown"]["total"].get<double>(), 0.1 * 1.0, 1e-12);
    EXPECT_EQ(f.image().calls(), 0u);

    auto partial = svc.handle_score(
        json{{"items", {item("Hope is a lighthouse.", "<source>a</source><target>b</target>")}}}.dump());
    const auto& p = partial.body["items"][0]["breakdown"];
    double fmt = p["format"].get<double>();
    EXPECT_GT(fmt, 0.0);
    EXPECT_LT(fmt, 1.0);
    EXPECT_NEAR(p["total"].get<double>(), 0.1 * fmt + 0.1, 1e-12);
}

TEST(Service, RejectsBadRequests) {
    Fixture f;
    RewardService svc(f.backends, f.calculator, f.options());
    EXPECT_EQ(svc.handle_score("not json").status, 400);
    EXPECT_EQ(svc.handle_score("{}").status, 400);
    EXPECT_EQ(svc.handle_score(json{{"items", json::array()}}.dump()).status, 400);
    EXPECT_EQ(svc.handle_score(json{{"items", {{{"metaphor_text", "x"}}}}}.dump()).status, 400);
    EXPECT_EQ(svc.handle_score(json{{"items", {item("  ", "x")}}}.dump()).status, 400);
    EXPECT_EQ(svc.handle_score(json{{"group_id", 5}, {"items", {good(1)}}}.dump()).status, 400);
    EXPECT_EQ(svc.handle_score(json{{"weights_override", {{"clip", -1.0}}}, {"items", {good(1)}}}.dump()).status, 400);
    json big{{"items", json::array()}};
    for (int i = 0; i < 65; ++i) big["items"].push_back(good(i));
    EXPECT_EQ(svc.handle_score(big.dump()).status, 413);
    EXPECT_EQ(f.image().calls(), 0u);
}

TEST(Service, BearerTokenIsEnforced) {
    Fixture f;
    auto opts = f.options();
    opts.bearer_token = "t0k";
    RewardService svc(f.backends, f.calculator, opts);
    std::string body = json{{"items", {good(1)}}}.dump();
    EXPECT_EQ(svc.handle_score(body).status, 401);
    EXPECT_EQ(svc.handle_score(body, "Bearer nope").status, 401);
    EXPECT_EQ(svc.handle_score(body, "Bearer t0k").status, 200);
}

TEST(Service, WeightsOverrideChangesTotalsNotCache) {
    Fixture f;
    RewardService svc(f.backends, f.calculator, f.options());
    auto a = svc.handle_score(json{{"items", {good(1)}}}.dump());
    auto b = svc.handle_score(json{{"weights_override", {{"clip", 0.0}}}, {"items", {good(1)}}}.dump());
    const auto& c = a.body["items"][0]["breakdown"];
    EXPECT_NEAR(b.body["items"][0]["breakdown"]["total"].get<double>(),
                a.body["items"][0]["breakdown"]["total"].get<double>() - 0.2 * c["clip"].get<double>(), 1e-12);
    EXPECT_EQ(f.calculator->stats().evaluations, 1u);
}

TEST(Service, BackendOutageGives502AndNoAdvantages) {
    Fixture f;
    RewardService svc(f.backends, f.calculator, f.options());
    f.image().set_available(false);
    auto reply = svc.handle_score(json{{"group_id", "g"}, {"items", {good(1), item("x", "no tags")}}}.dump());
    EXPECT_EQ(reply.status, 502);
    EXPECT_TRUE(reply.body["items"][0]["breakdown"].is_null());
    EXPECT_FALSE(reply.body["items"][0]["error"].is_null());
    EXPECT_FALSE(reply.body["items"][1]["breakdown"].is_null());
    EXPECT_TRUE(reply.body["advantages"].is_null());
    f.image().set_available(true);
    EXPECT_EQ(svc.handle_score(json{{"items", {good(1)}}}.dump()).status, 200);
}

TEST(Service, RepeatedRequestsAreIdempotent) {
    Fixture f;
    RewardService svc(f.backends, f.calculator, f.options());
    json req{{"group_id", "g"}, {"items", json::array()}};
    for (int i = 0; i < 8; ++i) req["items"].push_back(good(i % 5));
    auto a = svc.handle_score(req.dump());
    auto b = svc.handle_score(req.dump());
    EXPECT_EQ(a.body.dump(), b.body.dump());
    EXPECT_EQ(f.calculator->stats().evaluations, 5u);
}

TEST(Health, ReportsDegradedAndCachesForTtl) {
    Fixture f;
    RewardService svc(f.backends, f.calculator, f.options());
    auto h = svc.handle_health();
    EXPECT_EQ(h.status, 200);
    EXPECT_EQ(h.body["status"], "ok");
    EXPECT_EQ(svc.probe_rounds(), 1u);
    static_cast<MockChatBackend&>(*f.backends.vlm).set_available(false);
    f.now += std::chrono::seconds(2);
    EXPECT_EQ(svc.handle_health().body["status"], "ok");
    EXPECT_EQ(svc.probe_rounds(), 1u);
    f.now += std::chrono::seconds(4);
    auto d = svc.handle_health();
    EXPECT_EQ(d.body["status"], "degraded");
    EXPECT_EQ(svc.probe_rounds(), 2u);
    EXPECT_FALSE(d.body["backend_reachability"]["vlm"].get<bool>());
    EXPECT_TRUE(d.body["backend_reachability"]["llm"].get<bool>());
}

TEST(ListenAddress, Parses) {
    EXPECT_EQ(parse_listen_address("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
    EXPECT_THROW(parse_listen_address("nohost"), Error);
    EXPECT_THROW(parse_listen_address("h:99999"), Error);
}

TEST(ServiceServer, HttpRoundTrip) {
    Fixture f;
    auto opts = f.options();
    opts.bearer_token = "t0k";
    RewardService svc(f.backends, f.calculator, opts);
    ServiceServer server(svc);
    int port = server.bind("127.0.0.1", 0);
    std::thread t([&] { server.run(); });
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(30, 0);
    auto health = cli.Get("/v1/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    EXPECT_EQ(json::parse(health->body)["status"], "ok");
    std::string body = json{{"items", {good(1), good(2)}}}.dump();
    auto denied = cli.Post("/v1/score", body, "application/json");
    ASSERT_TRUE(denied);
    EXPECT_EQ(denied->status, 401);
    httplib::Headers auth{{"Authorization", "Bearer t0k"}};
    auto ok = cli.Post("/v1/score", auth, body, "application/json");
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 200);
    EXPECT_EQ(json::parse(ok->body)["items"].size(), 2u);
    server.stop();
    t.join();
}
