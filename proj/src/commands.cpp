// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/commands.hpp"

#include <csignal>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mforge/errors.hpp"
#include "mforge/png.hpp"
#include "mforge/service.hpp"

namespace mforge {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string(), path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string cell(std::optional<double> v) { return v ? fmt::format("{:.4f}", *v) : "-"; }

std::size_t word_count_of(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : text) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

// A usable runs.jsonl record: selected iteration exists and has a breakdown.
bool well_formed_run(const json& r) {
    if (!r.is_object() || !r.contains("metaphor") || !r["metaphor"].is_object()) return false;
    if (!r["metaphor"].contains("text") || !r["metaphor"]["text"].is_string()) return false;
    if (!r.contains("iterations") || !r["iterations"].is_array() || r["iterations"].empty()) return false;
    if (!r.contains("selected_index") || !r["selected_index"].is_number_integer()) return false;
    auto sel = r["selected_index"].get<std::int64_t>();
    if (sel < 0 || static_cast<std::size_t>(sel) >= r["iterations"].size()) return false;
    const json& b = r["iterations"][static_cast<std::size_t>(sel)]["breakdown"];
    if (!b.is_object()) return false;
    for (const char* k : {"decomposition", "clip", "s_presence", "t_presence", "m_align", "bert_s", "bert_t", "bert_m",
                          "total"})
        if (!b.contains(k) || !b[k].is_number()) return false;
    return true;
}

const json& selected_breakdown(const json& run) {
    return run["iterations"][run["selected_index"].get<std::size_t>()]["breakdown"];
}

std::string run_label(const json& run) {
    const json& m = run["metaphor"];
    return m.contains("id") && m["id"].is_string() ? m["id"].get<std::string>() : m["text"].get<std::string>();
}

} // namespace

// --- dataset -------------------------------------------------------------------

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    if (quoted) throw Error(ErrorCode::Config, "unterminated quote in CSV line", std::string(line));
    return fields;
}

std::vector<Metaphor> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read dataset " + path.string(), path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty()) ++first;
    bool csv = path.extension() == ".csv";
    if (first < lines.size()) {
        auto head = split_csv_line(lines[first]);
        if (head.size() >= 2 && trim(head[0]) == "id" && trim(head[1]) == "text") csv = true;
    }

    std::vector<Metaphor> out;
    std::set<std::string> seen;
    auto add = [&](Metaphor m, std::size_t lineno) {
        if (!seen.insert(m.id()).second)
            throw Error(ErrorCode::Config, fmt::format("duplicate metaphor id '{}' on line {}", m.id(), lineno), m.id());
        out.push_back(std::move(m));
    };
    if (csv) {
        if (first >= lines.size()) return out;
        auto header = split_csv_line(lines[first]);
        std::map<std::string, std::size_t> col;
        for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
        if (!col.count("text")) throw Error(ErrorCode::Config, "CSV dataset needs a 'text' column");
        for (std::size_t i = first + 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            auto f = split_csv_line(lines[i]);
            auto get = [&](const char* name) -> std::string {
                auto it = col.find(name);
                return it != col.end() && it->second < f.size() ? trim(f[it->second]) : std::string();
            };
            std::string category = get("category");
            add(Metaphor(get("id"), get("text"), category.empty() ? std::nullopt : std::optional(category)), i + 1);
        }
    } else {
        for (std::size_t i = 0; i < lines.size(); ++i) {
            std::string t = trim(lines[i]);
            if (t.empty() || t.front() == '#') continue;
            add(Metaphor("", t), i + 1);
        }
    }
    return out;
}

Pipeline make_pipeline(BackendSet backends, double clip_scale) {
    Pipeline p;
    p.backends = std::move(backends);
    p.decomposer = std::make_shared<Decomposer>(p.backends.llm, p.backends.judge_for_decomposition());
    p.judge = std::make_shared<Judge>(p.backends.vlm);
    p.similarity = std::make_shared<SimilarityScorer>(p.backends.embed, clip_scale);
    p.evaluator = std::make_shared<PipelineEvaluator>(p.backends.image, p.judge, p.similarity);
    return p;
}

// --- aggregation -----------------------------------------------------------------

MetricMeans mean_metrics(std::span<const json> runs) {
    MetricMeans m;
    for (const auto& r : runs) {
        const json& b = selected_breakdown(r);
        m.decomposition += b["decomposition"].get<double>();
        m.clip += b["clip"].get<double>();
        m.m_align += b["m_align"].get<double>();
        m.s_presence += b["s_presence"].get<double>();
        m.t_presence += b["t_presence"].get<double>();
        m.bert_s += b["bert_s"].get<double>();
        m.bert_t += b["bert_t"].get<double>();
        m.bert_m += b["bert_m"].get<double>();
        m.total += b["total"].get<double>();
        ++m.count;
    }
    if (m.count == 0) return m;
    const double n = static_cast<double>(m.count);
    for (double* f : {&m.decomposition, &m.clip, &m.m_align, &m.s_presence, &m.t_presence, &m.bert_s, &m.bert_t,
                      &m.bert_m, &m.total})
        *f /= n;
    return m;
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricMeans>>& rows) {
    std::string out = "| Group | Runs | Decomposition | CLIP | MA | S-p | T-p | BERT-S | BERT-T | BERT-M | Total |\n"
                      "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& [label, m] : rows) {
        out += fmt::format("| {} | {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} |\n",
                           label, m.count, m.decomposition, m.clip, m.m_align, m.s_presence, m.t_presence, m.bert_s,
                           m.bert_t, m.bert_m, m.total);
    }
    return out;
}

RunsFile read_runs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string(), path.string());
    RunsFile f;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !well_formed_run(j)) {
            spdlog::warn("{}:{}: skipping malformed run record", path.string(), lineno);
            ++f.skipped_lines;
            continue;
        }
        f.runs.push_back(std::move(j));
    }
    return f;
}

std::string report_markdown(const RunsFile& file, std::size_t short_max_words) {
    std::string out = "# Run report\n\n";
    out += fmt::format("Runs: {}\n", file.runs.size());
    if (file.skipped_lines) out += fmt::format("Skipped malformed lines: {}\n", file.skipped_lines);
    if (file.runs.empty()) {
        out += "\nZero runs to report.\n";
        return out;
    }

    out += "\n## Overall\n\n";
    out += metrics_table({{"all", mean_metrics(file.runs)}});

    std::map<std::string, std::vector<json>> by_category;
    for (const auto& r : file.runs) {
        const json& m = r["metaphor"];
        if (m.contains("category") && m["category"].is_string()) by_category[m["category"].get<std::string>()].push_back(r);
    }
    if (!by_category.empty()) {
        std::vector<std::pair<std::string, MetricMeans>> rows;
        for (const auto& [cat, runs] : by_category) rows.emplace_back(cat, mean_metrics(runs));
        std::size_t uncategorized = 0;
        for (const auto& r : file.runs)
            if (!r["metaphor"].contains("category") || !r["metaphor"]["category"].is_string()) ++uncategorized;
        out += "\n## By category\n\n" + metrics_table(rows);
        if (uncategorized) out += fmt::format("\n{} run(s) carry no category.\n", uncategorized);
    }

    std::vector<json> short_runs, long_runs;
    for (const auto& r : file.runs)
        (word_count_of(r["metaphor"]["text"].get<std::string>()) <= short_max_words ? short_runs : long_runs)
            .push_back(r);
    std::vector<std::pair<std::string, MetricMeans>> length_rows;
    if (!short_runs.empty())
        length_rows.emplace_back(fmt::format("short (<= {} words)", short_max_words), mean_metrics(short_runs));
    if (!long_runs.empty())
        length_rows.emplace_back(fmt::format("long (> {} words)", short_max_words), mean_metrics(long_runs));
    out += "\n## By metaphor length\n\n" + metrics_table(length_rows);

    out += "\n## Reward trajectories\n\n";
    for (const auto& r : file.runs) {
        std::string traj;
        for (const auto& it : r["iterations"]) {
            if (!traj.empty()) traj += ", ";
            const json& b = it.contains("breakdown") ? it["breakdown"] : json();
            traj += b.is_object() && b.contains("total") && b["total"].is_number()
                        ? fmt::format("{:.4f}", b["total"].get<double>())
                        : std::string("failed");
        }
        out += fmt::format("- `{}`: {} (selected {})\n", run_label(r), traj, r["selected_index"].get<int>());
    }
    return out;
}

// --- eval --------------------------------------------------------------------------

std::vector<EvalPair> load_eval_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read pairs file " + path.string(), path.string());
    std::vector<EvalPair> out;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        auto bad = [&](const std::string& why) {
            return Error(ErrorCode::Config, fmt::format("{}:{}: {}", path.string(), lineno, why));
        };
        if (j.is_discarded() || !j.is_object()) throw bad("not a JSON object");
        if (!j.contains("metaphor") || !j["metaphor"].is_string()) throw bad("missing 'metaphor'");
        if (!j.contains("image") || !j["image"].is_string()) throw bad("missing 'image'");
        auto str = [&](const char* k) -> std::optional<std::string> {
            if (!j.contains(k) || j[k].is_null()) return std::nullopt;
            if (!j[k].is_string()) throw bad(std::string("'") + k + "' must be a string");
            return j[k].get<std::string>();
        };
        EvalPair p{Metaphor(str("id").value_or(""), j["metaphor"].get<std::string>(), str("category")), {}, {}, {}};
        std::filesystem::path img = j["image"].get<std::string>();
        p.image = img.is_relative() ? path.parent_path() / img : img;
        auto s = str("source"), t = str("target"), m = str("meaning");
        if (s || t || m) {
            if (!(s && t && m)) throw bad("source, target and meaning must be given together");
            p.stm.emplace(*s, *t, *m);
        }
        p.prompt = str("prompt");
        out.push_back(std::move(p));
    }
    return out;
}

EvalRow evaluate_pair(const Pipeline& pipeline, const EvalPair& pair) {
    EvalRow row;
    row.id = pair.metaphor.id();
    try {
        auto bytes = read_file(pair.image);
        GenerationParams params = GenerationParams::turbo();
        if (auto dims = png::read_dimensions(bytes))
            params = GenerationParams(params.guidance_scale(), params.inference_steps(), dims->width, dims->height);
        std::string prompt_text = pair.prompt.value_or(pair.metaphor.text());
        ImageArtifact image(std::move(bytes), params, prompt_text);
        row.clip = pipeline.similarity->clip_score(image, VisualPrompt(prompt_text));
        if (pair.stm) {
            const Decomposition& d = *pair.stm;
            VlmAnalysis a = pipeline.judge->analyze_with_stm(image, pair.metaphor, d, AnalysisDialect::Json);
            row.m_align = a.m_align();
            row.s_presence = a.s_presence();
            row.t_presence = a.t_presence();
            row.decomposition = pipeline.decomposer->score_decomposition(pair.metaphor, d).score();
            row.bert_s = pipeline.similarity->bert_similarity(d.source(), a.s_prime()).value;
            row.bert_t = pipeline.similarity->bert_similarity(d.target(), a.t_prime()).value;
            row.bert_m = pipeline.similarity->bert_similarity(d.meaning(), a.m_prime()).value;
        } else {
            row.m_align = pipeline.judge->analyze_without_stm(image, pair.metaphor).alignment_score();
        }
    } catch (const std::exception& e) {
        row = EvalRow{row.id, {}, {}, {}, {}, {}, {}, {}, {}, std::string(e.what())};
    }
    return row;
}

std::string eval_table(std::span<const EvalRow> rows) {
    std::string out = "| Metaphor | CLIP | MA | Decomposition | S-p | T-p | BERT-S | BERT-T | BERT-M | Note |\n"
                      "|---|---:|---:|---:|---:|---:|---:|---:|---:|---|\n";
    for (const auto& r : rows) {
        out += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", r.id, cell(r.clip), cell(r.m_align),
                           cell(r.decomposition), cell(r.s_presence), cell(r.t_presence), cell(r.bert_s),
                           cell(r.bert_t), cell(r.bert_m), r.error ? "error: " + *r.error : std::string());
    }
    out += "\nBERT columns are raw F1 without baseline rescaling.\n";
    return out;
}

// --- subcommands --------------------------------------------------------------------

int cmd_run(const RunConfig& cfg, std::ostream& out) {
    if (!cfg.dataset_path) throw Error(ErrorCode::Config, "no dataset given (use --dataset)");
    std::vector<Metaphor> metaphors = load_dataset(*cfg.dataset_path);
    if (metaphors.empty()) throw Error(ErrorCode::Config, "no metaphors in " + cfg.dataset_path->string());

    std::filesystem::create_directories(cfg.out_dir);
    Pipeline p = make_pipeline(make_backends(cfg), cfg.clip_scale);
    RefineryOptions opts;
    opts.out_dir = cfg.out_dir;
    opts.config_snapshot = to_json(cfg);
    Refinery refinery(p.decomposer, p.evaluator, p.backends.llm, opts);
    RunWriter writer(cfg.out_dir / "runs.jsonl");

    auto outcomes = run_batch(refinery, metaphors, cfg.n_iterations, cfg.active_params(), cfg.weights,
                              cfg.parallelism, &writer);
    std::vector<json> done;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].run) {
            done.push_back(to_json(*outcomes[i].run));
        } else {
            ++failed;
            out << "run failed for " << metaphors[i].id() << ": " << outcomes[i].error.value_or("unknown error") << '\n';
        }
    }
    std::string summary = "# Summary\n\n" + metrics_table({{"all", mean_metrics(done)}});
    if (failed) summary += fmt::format("\n{} of {} runs failed.\n", failed, metaphors.size());
    {
        std::ofstream s(cfg.out_dir / "summary.md", std::ios::trunc);
        if (!s) throw Error(ErrorCode::Io, "cannot write summary.md");
        s << summary;
    }
    out << summary;
    return failed ? 1 : 0;
}

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& pairs_path, std::ostream& out) {
    std::vector<EvalPair> pairs = load_eval_pairs(pairs_path);
    Pipeline p = make_pipeline(make_backends(cfg), cfg.clip_scale);
    std::vector<EvalRow> rows;
    rows.reserve(pairs.size());
    for (const auto& pair : pairs) rows.push_back(evaluate_pair(p, pair));
    out << eval_table(rows);
    for (const auto& r : rows)
        if (r.error) return 1;
    return 0;
}

int cmd_report(const std::filesystem::path& runs, std::size_t short_max_words, std::ostream& out) {
    out << report_markdown(read_runs(runs), short_max_words);
    return 0;
}

namespace {
ServiceServer* g_server = nullptr;
extern "C" void stop_on_signal(int) {
    if (g_server) g_server->stop();
}
} // namespace

int cmd_serve(const RunConfig& cfg, std::optional<std::string> bearer_token, std::ostream& out) {
    auto [host, port] = parse_listen_address(cfg.listen);
    Pipeline p = make_pipeline(make_backends(cfg), cfg.clip_scale);
    auto calculator = std::make_shared<RewardCalculator>(p.decomposer, p.evaluator, cfg.cache_dir);
    ServiceOptions opts;
    opts.max_batch = cfg.max_batch;
    opts.parallelism = cfg.service_parallelism;
    opts.bearer_token = std::move(bearer_token);
    opts.default_params = cfg.active_params();
    opts.weights = cfg.weights;
    RewardService service(p.backends, calculator, opts);
    ServiceServer server(service);
    int bound = server.bind(host, port);
    out << "listening on " << host << ':' << bound << std::endl;
    g_server = &server;
    std::signal(SIGINT, stop_on_signal);
    std::signal(SIGTERM, stop_on_signal);
    server.run();
    g_server = nullptr;
    return 0;
}

} // namespace mforge
