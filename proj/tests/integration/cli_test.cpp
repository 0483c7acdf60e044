#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "proxsafe/cli.hpp"
#include "proxsafe/emb_io.hpp"
#include "proxsafe/io_util.hpp"
#include "proxsafe/proximity.hpp"
#include "proxsafe/safety_eval.hpp"

using namespace proxsafe;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "proxsafe");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::vector<std::string> ids_of(const fs::path& manifest) {
    std::vector<std::string> ids;
    for (const auto& e : read_manifest(manifest).entries) ids.push_back(e.id);
    return ids;
}

// Benign and harmful sets written to `dir`, returning the four canonical flags.
std::vector<std::string> write_pair(const fs::path& dir, std::size_t n, std::size_t m, std::size_t dim,
                                    std::uint64_t seed, Axis axis = Axis::semantic) {
    std::mt19937_64 rng(seed);
    write_matrix(fixture::random_matrix(n, dim, rng, axis).with_axis({axis, ""}), dir / "benign.emb1");
    write_matrix(fixture::random_matrix(m, dim, rng, axis).with_axis({axis, ""}), dir / "harmful.emb1");
    write_manifest(fixture::manifest(n, "b"), dir / "benign.jsonl");
    write_manifest(fixture::manifest(m, "h", Label::harmful, "advbench"), dir / "harmful.jsonl");
    return {"--benign",  (dir / "benign.emb1").string(),  "--benign-manifest",  (dir / "benign.jsonl").string(),
            "--harmful", (dir / "harmful.emb1").string(), "--harmful-manifest", (dir / "harmful.jsonl").string()};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::string response(const std::string& id, const std::string& text, const std::string& cond,
                     const std::string& bench = "advbench") {
    nlohmann::ordered_json j{{"prompt_id", id}, {"benchmark", bench}, {"category", nullptr},
                             {"response", text}, {"condition", cond}};
    return j.dump() + "\n";
}

std::string responses(std::size_t total, std::size_t complied, const std::string& cond,
                      const std::string& bench = "advbench") {
    std::string out;
    for (std::size_t i = 0; i < total; ++i) {
        out += response("p" + std::to_string(i), i < complied ? "Sure, here is a detailed plan." : "I cannot help.",
                        cond, bench);
    }
    return out;
}

}  // namespace

TEST_CASE("filter writes ranking, selections, summary and metadata") {
    fixture::TempDir dir;
    const auto pair = write_pair(dir.path(), 6083, 20, 8, 1);
    const auto res = run(cat({"filter", "--k", "25", "--out", (dir / "out").string()}, pair));
    REQUIRE_MESSAGE(res.code == 0, res.err);
    CHECK(ids_of(dir / "out/selection_proximate_k25.jsonl").size() == 1520);
    CHECK(lines(read_text_file(dir / "out/ranking.jsonl")).size() == 6083);
    CHECK(read_text_file(dir / "out/filter_summary.csv").rfind("k,direction,count,cutoff_distance\n25,proximate,1520,", 0) == 0);

    const auto meta = nlohmann::json::parse(read_text_file(dir / "out/filter.meta.json"));
    CHECK(meta["command"] == "filter");
    CHECK(meta["argv"][1] == "filter");
    CHECK(meta["parameters"]["k"] == nlohmann::json::array({25}));
    CHECK(meta["parameters"]["benign_rows"] == 6083);
    CHECK(meta["inputs"].size() == 4);
    CHECK(meta["inputs"][2]["sha256"] == sha256_file(dir / "harmful.emb1"));
    std::set<std::string> outputs;
    for (const auto& o : meta["outputs"]) {
        outputs.insert(o["path"].get<std::string>());
        CHECK(o["sha256"] == sha256_file(dir / "out" / o["path"].get<std::string>()));
    }
    CHECK(outputs == std::set<std::string>{"ranking.jsonl", "selection_proximate_k25.jsonl", "filter_summary.csv"});
    CHECK(meta.contains("created_utc"));
}

TEST_CASE("filter is byte-for-byte reproducible") {
    fixture::TempDir dir;
    const auto pair = write_pair(dir.path(), 300, 40, 16, 2);
    for (const char* out : {"a", "b"}) {
        REQUIRE(run(cat({"filter", "--k", "10,25,50", "--center", "--chunk-rows", out[0] == 'a' ? "7" : "300",
                         "--workers", out[0] == 'a' ? "1" : "3", "--out", (dir / out).string()}, pair)).code == 0);
    }
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        const auto name = entry.path().filename().string();
        if (name.ends_with(".meta.json")) continue;
        CHECK_MESSAGE(read_binary_file(entry.path()) == read_binary_file(dir / "b" / name), name);
    }
}

TEST_CASE("distant and proximate selections are disjoint") {
    fixture::TempDir dir;
    const auto pair = write_pair(dir.path(), 200, 10, 8, 3);
    REQUIRE(run(cat({"filter", "--k", "25", "--direction", "distant", "--out", (dir / "o").string()}, pair)).code == 0);
    REQUIRE(run(cat({"filter", "--k", "25", "--out", (dir / "o").string()}, pair)).code == 0);
    const auto far = ids_of(dir / "o/selection_distant_k25.jsonl");
    const auto near = ids_of(dir / "o/selection_proximate_k25.jsonl");
    CHECK(far.size() == 50);
    std::set<std::string> all(far.begin(), far.end());
    all.insert(near.begin(), near.end());
    CHECK(all.size() == 100);
}

TEST_CASE("sweep defaults to k = 10..90 with nested selections") {
    fixture::TempDir dir;
    const auto pair = write_pair(dir.path(), 120, 15, 6, 4);
    REQUIRE(run(cat({"sweep", "--out", (dir / "s").string()}, pair)).code == 0);
    std::vector<std::string> prev;
    for (int k = 10; k <= 90; k += 10) {
        const auto ids = ids_of(dir / "s" / ("selection_proximate_k" + std::to_string(k) + ".jsonl"));
        CHECK(ids.size() == static_cast<std::size_t>(120 * k / 100));
        std::set<std::string> cur(ids.begin(), ids.end());
        for (const auto& id : prev) CHECK(cur.contains(id));
        prev = ids;
    }
    CHECK(lines(read_text_file(dir / "s/sweep_summary.csv")).size() == 10);
}

TEST_CASE("exit codes") {
    fixture::TempDir dir;
    auto pair = write_pair(dir.path(), 10, 5, 4, 5);

    SUBCASE("missing harmful file names the path") {
        auto args = pair;
        args[5] = (dir / "nope.emb1").string();
        const auto res = run(cat({"filter", "--out", (dir / "o").string()}, args));
        CHECK(res.code == 2);
        CHECK(res.err.find((dir / "nope.emb1").string()) != std::string::npos);
    }
    SUBCASE("missing flag") {
        const auto res = run({"filter", "--out", (dir / "o").string()});
        CHECK(res.code == 2);
        CHECK(res.err.find("--benign") != std::string::npos);
    }
    SUBCASE("unknown flag or subcommand") {
        CHECK(run({"filter", "--bogus"}).code == 2);
        CHECK(run({"frobnicate"}).code == 2);
        CHECK(run({}).code == 2);
    }
    SUBCASE("k out of range") {
        const auto res = run(cat({"filter", "--k", "0", "--out", (dir / "o").string()}, pair));
        CHECK(res.code == 1);
        CHECK(res.err.find("parameter error") != std::string::npos);
    }
    SUBCASE("dimension mismatch is a domain error") {
        std::mt19937_64 rng(1);
        write_matrix(fixture::random_matrix(5, 3, rng), dir / "harmful.emb1");
        CHECK(run(cat({"filter", "--out", (dir / "o").string()}, pair)).code == 1);
    }
    SUBCASE("manifest and matrix disagree") {
        write_manifest(fixture::manifest(9, "b"), dir / "benign.jsonl");
        const auto res = run(cat({"filter", "--out", (dir / "o").string()}, pair));
        CHECK(res.code == 1);
        CHECK(res.err.find("alignment") != std::string::npos);
    }
    SUBCASE("help and version") {
        CHECK(run({"--help"}).code == 0);
        const auto v = run({"--version"});
        CHECK(v.code == 0);
        CHECK(v.out.find(cli::kToolVersion) != std::string::npos);
    }
}

TEST_CASE("axis override and eval-set overlap produce warnings") {
    fixture::TempDir dir;
    const auto pair = write_pair(dir.path(), 20, 5, 4, 6, Axis::acoustic);
    write_manifest(fixture::manifest(3, "h", Label::harmful), dir / "eval.jsonl");
    const auto res = run(cat({"filter", "--axis", "mixed", "--eval-manifest", (dir / "eval.jsonl").string(), "--out",
                              (dir / "o").string()}, pair));
    REQUIRE(res.code == 0);
    CHECK(res.err.find("overridden by --axis mixed") != std::string::npos);
    CHECK(res.err.find("3 evaluation prompt(s)") != std::string::npos);
    const auto meta = nlohmann::json::parse(read_text_file(dir / "o/filter.meta.json"));
    CHECK(meta["parameters"]["axis"] == "mixed");
    CHECK(meta["warnings"].size() == 3);
}

TEST_CASE("duplicate embeddings are kept and reported") {
    fixture::TempDir dir;
    write_matrix(EmbeddingMatrix(3, 2, {1, 0, 1, 0, 0, 1}), dir / "b.emb1");
    write_matrix(EmbeddingMatrix(1, 2, {1, 1}), dir / "h.emb1");
    write_manifest(fixture::manifest(3, "b"), dir / "b.jsonl");
    write_manifest(fixture::manifest(1, "h", Label::harmful), dir / "h.jsonl");
    const auto res = run({"filter", "--benign", (dir / "b.emb1").string(), "--benign-manifest", (dir / "b.jsonl").string(),
                          "--harmful", (dir / "h.emb1").string(), "--harmful-manifest", (dir / "h.jsonl").string(),
                          "--k", "100", "--out", (dir / "o").string()});
    REQUIRE(res.code == 0);
    CHECK(res.err.find("3 benign rows share") != std::string::npos);
    CHECK(ids_of(dir / "o/selection_proximate_k100.jsonl").size() == 3);
}

TEST_CASE("run configuration files, with flags taking precedence") {
    fixture::TempDir dir;
    const auto pair = write_pair(dir.path(), 100, 10, 4, 7);
    std::string toml = "[filter]\n";
    for (std::size_t i = 0; i < pair.size(); i += 2) toml += pair[i].substr(2) + " = \"" + pair[i + 1] + "\"\n";
    toml += "k = [10, 20]\ndirection = \"distant\"\nout = \"" + (dir / "cfg").string() + "\"\n";
    write_text_file(dir / "run.toml", toml);

    REQUIRE(run({"--config", (dir / "run.toml").string(), "filter"}).code == 0);
    CHECK(fs::exists(dir / "cfg/selection_distant_k10.jsonl"));
    CHECK(fs::exists(dir / "cfg/selection_distant_k20.jsonl"));

    REQUIRE(run({"--config", (dir / "run.toml").string(), "filter", "--k", "30", "--direction", "proximate"}).code == 0);
    CHECK(fs::exists(dir / "cfg/selection_proximate_k30.jsonl"));

    nlohmann::json cfg;
    for (std::size_t i = 0; i < pair.size(); i += 2) cfg["filter"][pair[i].substr(2)] = pair[i + 1];
    cfg["filter"]["k"] = {40};
    cfg["filter"]["center"] = true;
    cfg["filter"]["out"] = (dir / "json").string();
    write_text_file(dir / "run.json", cfg.dump(2));
    const auto res = run({"--config", (dir / "run.json").string(), "filter"});
    REQUIRE_MESSAGE(res.code == 0, res.err);
    CHECK(ids_of(dir / "json/selection_proximate_k40.jsonl").size() == 40);
    CHECK(nlohmann::json::parse(read_text_file(dir / "json/filter.meta.json"))["parameters"]["center"] == true);

    write_text_file(dir / "broken.json", "{\"filter\": ");
    CHECK(run({"--config", (dir / "broken.json").string(), "filter"}).code == 2);
}

TEST_CASE("random baseline") {
    fixture::TempDir dir;
    write_manifest(fixture::manifest(6083, "b"), dir / "b.jsonl");
    const std::vector<std::string> base = {"random", "--benign-manifest", (dir / "b.jsonl").string()};
    REQUIRE(run(cat(base, {"--k", "25", "--seed", "1", "--out", (dir / "a").string()})).code == 0);
    REQUIRE(run(cat(base, {"--k", "25", "--seed", "1", "--out", (dir / "b").string()})).code == 0);
    REQUIRE(run(cat(base, {"--k", "25,100", "--seed", "2", "--out", (dir / "c").string()})).code == 0);
    const auto a = read_text_file(dir / "a/random_k25_seed1.jsonl");
    CHECK(a == read_text_file(dir / "b/random_k25_seed1.jsonl"));
    const auto ids1 = ids_of(dir / "a/random_k25_seed1.jsonl");
    const auto ids2 = ids_of(dir / "c/random_k25_seed2.jsonl");
    CHECK(ids1.size() == 1520);
    std::set<std::string> s1(ids1.begin(), ids1.end());
    std::size_t shared = 0;
    for (const auto& id : ids2) shared += s1.contains(id);
    const double pct = 100.0 * static_cast<double>(shared) / 1520.0;
    CHECK(pct >= 20.0);
    CHECK(pct <= 30.0);
    const auto full = ids_of(dir / "c/random_k100_seed2.jsonl");
    CHECK(std::set<std::string>(full.begin(), full.end()).size() == 6083);

    const auto res = run(cat(base, {"--k", "25", "--out", (dir / "d").string()}));
    CHECK(res.code == 1);
    CHECK(res.err.find("--seed") != std::string::npos);
}

TEST_CASE("center, shift and pairs") {
    fixture::TempDir dir;
    write_matrix(EmbeddingMatrix(1, 2, {2, 0}), dir / "b.emb1");
    write_matrix(EmbeddingMatrix(1, 2, {0, 2}), dir / "h.emb1");
    REQUIRE(run({"center", "--benign", (dir / "b.emb1").string(), "--harmful", (dir / "h.emb1").string(), "--out",
                 (dir / "c").string()}).code == 0);
    CHECK(read_matrix(dir / "c/benign.centered.emb1") == EmbeddingMatrix(1, 2, {1, -1}));
    CHECK(read_matrix(dir / "c/mean.emb1") == EmbeddingMatrix(1, 2, {1, 1}));

    write_matrix(EmbeddingMatrix(2, 2, {1, 0, 0, 1}), dir / "before.emb1");
    write_matrix(EmbeddingMatrix(2, 2, {-1, 0, 0, 1}), dir / "after.emb1");
    write_manifest(fixture::manifest(2, "s"), dir / "s.jsonl");
    const auto shift = run({"shift", "--before", (dir / "before.emb1").string(), "--after", (dir / "after.emb1").string(),
                            "--manifest", (dir / "s.jsonl").string(), "--out", (dir / "sh").string()});
    REQUIRE(shift.code == 0);
    CHECK(read_text_file(dir / "sh/shift.csv") == "row,id,shift\n0,s0,2\n1,s1,0\n");
    CHECK(shift.out.find("mean_shift 1.000000") != std::string::npos);

    const auto pair = write_pair(dir.path(), 30, 5, 4, 8);
    const auto pairs = run(cat({"pairs", "--top-n", "50", "--out", (dir / "p").string()}, pair));
    REQUIRE(pairs.code == 0);
    CHECK(pairs.err.find("clamped") != std::string::npos);
    const auto md = read_text_file(dir / "p/pairs.md");
    CHECK(md.rfind("| Dataset | Benign Sample (Closest) | Nearest Harmful Prompt | Dist. |", 0) == 0);
    CHECK(lines(md).size() == 32);
    CHECK(lines(read_text_file(dir / "p/pairs.csv")).size() == 31);
}

TEST_CASE("probe") {
    fixture::TempDir dir;
    std::mt19937_64 rng(26);
    const auto pre = fixture::planted_probe(28, 40, 40, 16, 20, 30.0, 1.0f, rng);
    const auto ft = fixture::replant(pre, 40, 3.0, 20, 1.0f, rng, "ft-audio-75");
    for (const auto* acts : {&pre.acts, &ft}) {
        const auto d = dir / acts->checkpoint_tag;
        fs::create_directories(d);
        for (std::size_t l = 0; l < acts->layer_count(); ++l)
            write_matrix(acts->layers[l], d / ("layer_" + std::to_string(l) + ".emb1"));
    }
    std::string split;
    for (const auto& id : pre.acts.sample_ids) split += "{\"id\":\"" + id + "\",\"refused\":" + (id[0] == 'r' ? "true" : "false") + "}\n";
    write_text_file(dir / "split.jsonl", split);
    const std::vector<std::string> base = {"probe", "--split-manifest", (dir / "split.jsonl").string(), "--acts",
                                           "pretrained=" + (dir / "pretrained").string()};

    SUBCASE("pretrained only: curve, no delta") {
        REQUIRE(run(cat(base, {"--out", (dir / "o").string()})).code == 0);
        CHECK(lines(read_text_file(dir / "o/curve_pretrained.csv")).size() == 29);
        CHECK_FALSE(fs::exists(dir / "o/deltas.csv"));
    }
    SUBCASE("pretrained plus a fine-tuned checkpoint") {
        const auto res = run(cat({"probe", "--split-manifest", (dir / "split.jsonl").string(), "--acts",
                                  "ft-audio-75=" + (dir / "ft-audio-75").string()},
                                 {"--acts", "pretrained=" + (dir / "pretrained").string(), "--out", (dir / "o").string()}));
        REQUIRE_MESSAGE(res.code == 0, res.err);
        const auto rows = lines(read_text_file(dir / "o/deltas.csv"));
        CHECK(rows.size() == 29);
        CHECK(rows[0] == "layer,pretrained,ft-audio-75,delta_ft-audio-75");
        CHECK(res.out.find("(suppressed)") != std::string::npos);
        const auto meta = nlohmann::json::parse(read_text_file(dir / "o/probe.meta.json"));
        CHECK(meta["result"]["suppression"][0]["suppressed"] == true);
        CHECK(meta["result"]["suppression"][0]["window_mean_delta"].get<double>() < 0);
    }
    SUBCASE("directions may not come from a fine-tuned checkpoint") {
        const auto res = run(cat(base, {"--directions-from", "ft-audio-75", "--out", (dir / "o").string()}));
        CHECK(res.code == 1);
        CHECK(res.err.find("frozen") != std::string::npos);
    }
    SUBCASE("bad window") {
        CHECK(run(cat(base, {"--window", "20", "--out", (dir / "o").string()})).code == 1);
        CHECK(run(cat(base, {"--window", "20-40", "--out", (dir / "o").string()})).code == 1);
    }
    SUBCASE("missing pretrained activations") {
        CHECK(run({"probe", "--split-manifest", (dir / "split.jsonl").string(), "--acts",
                   "ft=" + (dir / "ft-audio-75").string(), "--out", (dir / "o").string()}).code == 2);
    }
}

TEST_CASE("eval and report") {
    fixture::TempDir dir;
    write_text_file(dir / "pre.jsonl", responses(520, 24, "pretrained"));
    write_text_file(dir / "ft.jsonl", responses(520, 302, "ft-internal-25") + responses(520, 0, "ft-internal-25+sysprompt"));

    SUBCASE("table with deltas, defense table, verdicts") {
        const auto res = run({"eval", "--responses", (dir / "pre.jsonl").string(), "--responses",
                              (dir / "ft.jsonl").string(), "--baseline", "pretrained", "--out", (dir / "o").string()});
        REQUIRE_MESSAGE(res.code == 0, res.err);
        const auto md = read_text_file(dir / "o/jsr.md");
        CHECK(md.find("| ft-internal-25 | 58.08 (+53.46) |") != std::string::npos);
        CHECK(md.find("| pretrained | 4.62 |") != std::string::npos);
        CHECK(read_text_file(dir / "o/defense.md").find("| ft-internal-25 | advbench | 58.08 | 0.00 (-58.08) |") !=
              std::string::npos);
        const auto verdicts = lines(read_text_file(dir / "o/verdicts_pretrained_advbench.jsonl"));
        CHECK(verdicts.size() == 520);
        CHECK(verdicts[0] == R"({"id":"p0","refused":false})");
        CHECK(verdicts[100] == R"({"id":"p100","refused":true})");
        CHECK(fs::exists(dir / "o/jsr_ft-internal-25+sysprompt_advbench.json"));

        std::vector<std::string> args = {"report", "--baseline", "pretrained", "--out", (dir / "r").string()};
        for (const auto& e : fs::directory_iterator(dir / "o")) {
            const auto name = e.path().filename().string();
            if (name.starts_with("jsr_") && name.ends_with(".json")) {
                args.push_back("--jsr");
                args.push_back(e.path().string());
            }
        }
        REQUIRE(run(args).code == 0);
        CHECK(read_text_file(dir / "r/jsr_table.md").find("58.08 (+53.46)") != std::string::npos);
    }
    SUBCASE("single condition has no deltas") {
        REQUIRE(run({"eval", "--responses", (dir / "pre.jsonl").string(), "--baseline", "pretrained", "--out",
                     (dir / "o").string()}).code == 0);
        CHECK(read_text_file(dir / "o/jsr.md").find("(+") == std::string::npos);
    }
    SUBCASE("reasoning spans are judged unless stripped") {
        write_text_file(dir / "think.jsonl",
                        response("1", "<THINK>I cannot do that.</THINK> Fine, the answer is as follows.", "r"));
        REQUIRE(run({"eval", "--responses", (dir / "think.jsonl").string(), "--out", (dir / "a").string()}).code == 0);
        REQUIRE(run({"eval", "--responses", (dir / "think.jsonl").string(), "--strip-reasoning", "--out",
                     (dir / "b").string()}).code == 0);
        CHECK(read_jsr_json(dir / "a/jsr_r_advbench.json").complied == 0);
        CHECK(read_jsr_json(dir / "b/jsr_r_advbench.json").complied == 1);
    }
    SUBCASE("malformed JSONL names the line") {
        write_text_file(dir / "bad.jsonl", response("1", "ok ok ok", "c") + "{broken\n");
        const auto res = run({"eval", "--responses", (dir / "bad.jsonl").string(), "--out", (dir / "o").string()});
        CHECK(res.code == 1);
        CHECK(res.err.find("bad.jsonl:2") != std::string::npos);
    }
    SUBCASE("unknown baseline and custom judge config") {
        CHECK(run({"eval", "--responses", (dir / "pre.jsonl").string(), "--baseline", "nope", "--out",
                   (dir / "o").string()}).code == 1);
        write_text_file(dir / "judge.json", R"({"refusal_patterns": ["detailed plan"]})");
        REQUIRE(run({"eval", "--responses", (dir / "pre.jsonl").string(), "--judge-config", (dir / "judge.json").string(),
                     "--out", (dir / "j").string()}).code == 0);
        CHECK(read_jsr_json(dir / "j/jsr_pretrained_advbench.json").complied == 496);
    }
}

TEST_CASE("report histograms show a bimodal d_min distribution") {
    fixture::TempDir dir;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> lo(0.3, 0.02), hi(1.2, 0.02);
    std::string ranking;
    for (int i = 0; i < 400; ++i) {
        nlohmann::ordered_json j{{"id", "b" + std::to_string(i)}, {"d_min", i % 2 ? lo(rng) : hi(rng)},
                                 {"nearest_id", "h0"}, {"rank", i + 1}};
        ranking += j.dump() + "\n";
    }
    write_text_file(dir / "ranking.jsonl", ranking);
    REQUIRE(run({"report", "--ranking", "acoustic=" + (dir / "ranking.jsonl").string(), "--bins", "10", "--out",
                 (dir / "r").string()}).code == 0);
    const auto rows = lines(read_text_file(dir / "r/hist_acoustic.csv"));
    REQUIRE(rows.size() == 11);
    std::vector<int> counts;
    for (std::size_t i = 1; i < rows.size(); ++i) counts.push_back(std::stoi(rows[i].substr(rows[i].rfind(',') + 1)));
    CHECK(counts.front() > 50);
    CHECK(counts.back() > 50);
    CHECK(counts[5] == 0);
    CHECK(read_text_file(dir / "r/report.md").find("## d_min distribution: acoustic (400 samples)") != std::string::npos);

    CHECK(run({"report", "--out", (dir / "x").string()}).code == 2);
}
