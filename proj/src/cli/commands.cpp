#include <algorithm>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "CLI11.hpp"
#include "proxsafe/cli.hpp"
#include "proxsafe/emb_io.hpp"
#include "proxsafe/error.hpp"
#include "proxsafe/io_util.hpp"
#include "proxsafe/proximity.hpp"
#include "proxsafe/refusal_probe.hpp"
#include "proxsafe/safety_eval.hpp"

namespace proxsafe::cli {

namespace fs = std::filesystem;

namespace {

// Options shared by the data-curation subcommands. Values come from the
// --config TOML file first; command-line flags override them.
struct RunConfig {
    std::string benign;
    std::string benign_manifest;
    std::string harmful;
    std::string harmful_manifest;
    std::string axis;
    std::vector<int> ks;
    std::string direction = "proximate";
    bool center = false;
    std::size_t chunk_rows = 1024;
    unsigned workers = 0;
    std::string judge_config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;

    // filter / sweep / pairs
    std::string eval_manifest;
    std::size_t top_n = 10;

    // shift
    std::string before;
    std::string after;
    std::string manifest;

    // probe
    std::string split_manifest;
    std::vector<std::string> acts;
    std::string pretrained_tag = "pretrained";
    std::string directions_from;
    std::string window = "20-26";

    // eval / report
    std::vector<std::string> responses;
    std::string baseline;
    bool strip_reasoning = false;
    std::vector<std::string> rankings;
    std::vector<std::string> jsr_reports;
    std::size_t bins = 20;
};

struct Context {
    std::vector<std::string> argv;
    std::ostream& out;
    std::ostream& err;
};

class Metadata {
public:
    Metadata(std::string command, const Context& ctx) {
        doc_["command"] = std::move(command);
        doc_["tool_version"] = kToolVersion;
        doc_["argv"] = ctx.argv;
        doc_["parameters"] = nlohmann::ordered_json::object();
        doc_["inputs"] = nlohmann::ordered_json::array();
        doc_["outputs"] = nlohmann::ordered_json::array();
        doc_["warnings"] = nlohmann::ordered_json::array();
    }

    template <class T>
    void param(const std::string& key, const T& value) {
        doc_["parameters"][key] = value;
    }
    void input(const std::string& role, const fs::path& path) {
        doc_["inputs"].push_back({{"role", role}, {"path", path.string()}, {"sha256", sha256_file(path)}});
    }
    void output(const fs::path& path) {
        doc_["outputs"].push_back({{"path", path.filename().string()}, {"sha256", sha256_file(path)}});
    }
    void warning(const std::string& w) { doc_["warnings"].push_back(w); }
    void result(const std::string& key, const nlohmann::ordered_json& value) { doc_["result"][key] = value; }

    void write(const fs::path& dir) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        std::ostringstream ts;
        ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
        doc_["created_utc"] = ts.str();
        write_text_file(dir / (doc_["command"].get<std::string>() + ".meta.json"), doc_.dump(2) + "\n");
    }

private:
    nlohmann::ordered_json doc_;
};

void warn(const Context& ctx, Metadata& meta, const std::string& message) {
    ctx.err << "warning: " << message << '\n';
    meta.warning(message);
}

fs::path require_file(const std::string& path, const char* flag) {
    if (path.empty()) fail(ErrorKind::io, std::string("missing required ") + flag);
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        fail(ErrorKind::io, std::string("file for ") + flag + " not found: " + path);
    }
    return path;
}

fs::path prepare_out_dir(const std::string& out) {
    if (out.empty()) fail(ErrorKind::io, "missing required --out");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) {
        fail(ErrorKind::io, "cannot create output directory " + out + ": " + ec.message());
    }
    return out;
}

std::string safe_name(std::string_view s) {
    std::string out;
    for (char c : s) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-' || c == '+';
        out += ok ? c : '_';
    }
    return out;
}

std::vector<int> validated_ks(std::vector<int> ks, std::vector<int> fallback) {
    if (ks.empty()) ks = std::move(fallback);
    for (int k : ks) {
        if (k < 1 || k > 100) fail(ErrorKind::parameter, "--k values must be in [1, 100], got " + std::to_string(k));
    }
    return ks;
}

void emit(const fs::path& path, std::string_view content, Metadata& meta) {
    write_text_file(path, content);
    meta.output(path);
}

struct LoadedPair {
    AlignedSet benign;
    AlignedSet harmful;
};

LoadedPair load_pair(const RunConfig& cfg, Metadata& meta, const Context& ctx) {
    const auto benign_path = require_file(cfg.benign, "--benign");
    const auto benign_man_path = require_file(cfg.benign_manifest, "--benign-manifest");
    const auto harmful_path = require_file(cfg.harmful, "--harmful");
    const auto harmful_man_path = require_file(cfg.harmful_manifest, "--harmful-manifest");
    meta.input("benign", benign_path);
    meta.input("benign_manifest", benign_man_path);
    meta.input("harmful", harmful_path);
    meta.input("harmful_manifest", harmful_man_path);

    auto benign_m = read_matrix(benign_path);
    auto harmful_m = read_matrix(harmful_path);
    if (!cfg.axis.empty()) {
        const Axis axis = parse_axis(cfg.axis);
        for (auto* m : {&benign_m, &harmful_m}) {
            if (m->axis().axis != axis) {
                warn(ctx, meta, "file axis '" + std::string(to_string(m->axis().axis)) +
                                    "' overridden by --axis " + cfg.axis);
            }
            *m = m->with_axis(AxisTag{axis, m->axis().encoder_name});
        }
    }
    auto benign = align_manifest(std::move(benign_m), read_manifest(benign_man_path));
    auto harmful = align_manifest(std::move(harmful_m), read_manifest(harmful_man_path));
    return {std::move(benign), std::move(harmful)};
}

// Optional centering, then row normalization; the distance engine then runs
// on unit rows.
LoadedPair prepare_geometry(LoadedPair pair, bool do_center) {
    if (do_center) {
        auto c = center(pair.benign.matrix, pair.harmful.matrix);
        pair.benign.matrix = std::move(c.centered_benign);
        pair.harmful.matrix = std::move(c.centered_harmful);
    }
    pair.benign.matrix = normalize_rows(pair.benign.matrix);
    pair.harmful.matrix = normalize_rows(pair.harmful.matrix);
    return pair;
}

void check_eval_overlap(const RunConfig& cfg, const SampleManifest& harmful, Metadata& meta,
                        const Context& ctx) {
    if (cfg.eval_manifest.empty()) return;
    const auto path = require_file(cfg.eval_manifest, "--eval-manifest");
    meta.input("eval_manifest", path);
    const auto eval = read_manifest(path);
    std::unordered_set<std::string_view> ids;
    for (const auto& e : harmful.entries) ids.insert(e.id);
    std::size_t shared = 0;
    for (const auto& e : eval.entries) shared += ids.contains(e.id) ? 1 : 0;
    if (shared > 0) {
        warn(ctx, meta, std::to_string(shared) +
                            " evaluation prompt(s) also appear in the harmful reference set used for filtering");
    }
}

ProximityRanking rank_pair(const RunConfig& cfg, const LoadedPair& pair, Metadata& meta, const Context& ctx) {
    auto ranking = min_distances(pair.benign, pair.harmful, EngineOptions{cfg.chunk_rows, cfg.workers});
    if (const auto dup = count_duplicate_distances(ranking); dup > 0) {
        warn(ctx, meta, std::to_string(dup) +
                            " benign rows share an identical (d_min, nearest harmful) pair; likely duplicated "
                            "embeddings, each kept as a distinct row");
    }
    return ranking;
}

void record_geometry_params(const RunConfig& cfg, const ProximityRanking& r, Metadata& meta) {
    meta.param("axis", std::string(to_string(r.axis.axis)));
    meta.param("center", cfg.center);
    meta.param("chunk_rows", cfg.chunk_rows);
    meta.param("benign_rows", r.benign_count);
    meta.param("harmful_rows", r.harmful_count);
}

std::string selection_file(const SelectionResult& s) {
    return "selection_" + std::string(to_string(s.spec.direction)) + "_k" + std::to_string(s.spec.k_percent) +
           ".jsonl";
}

int run_selection(const RunConfig& cfg, const Context& ctx, const char* command, std::vector<int> default_ks) {
    Metadata meta(command, ctx);
    const auto out = prepare_out_dir(cfg.out);
    const auto ks = validated_ks(cfg.ks, std::move(default_ks));
    const Direction direction = parse_direction(cfg.direction);
    if (cfg.chunk_rows == 0) fail(ErrorKind::parameter, "--chunk-rows must be positive");

    auto pair = prepare_geometry(load_pair(cfg, meta, ctx), cfg.center);
    check_eval_overlap(cfg, pair.harmful.manifest, meta, ctx);
    const auto ranking = rank_pair(cfg, pair, meta, ctx);
    record_geometry_params(cfg, ranking, meta);
    meta.param("direction", std::string(to_string(direction)));
    meta.param("k", ks);

    emit(out / "ranking.jsonl", ranking_jsonl(ranking, pair.harmful.manifest), meta);
    const auto selections = sweep(ranking, ks, direction);
    std::string summary = "k,direction,count,cutoff_distance\n";
    for (const auto& s : selections) {
        std::string body;
        for (const auto& e : selection_manifest(s, pair.benign.manifest).entries) body += manifest_line(e) + '\n';
        emit(out / selection_file(s), body, meta);
        summary += std::to_string(s.spec.k_percent) + ',' + std::string(to_string(direction)) + ',' +
                   std::to_string(s.selected_ids.size()) + ',' + format_float(static_cast<float>(s.cutoff_distance)) +
                   '\n';
        ctx.out << selection_file(s) << ": " << s.selected_ids.size() << " of " << ranking.benign_count
                << " (cutoff " << format_fixed(s.cutoff_distance, 6) << ")\n";
    }
    emit(out / (std::string(command) + "_summary.csv"), summary, meta);
    meta.write(out);
    return 0;
}

int cmd_random(const RunConfig& cfg, const Context& ctx) {
    Metadata meta("random", ctx);
    const auto out = prepare_out_dir(cfg.out);
    if (!cfg.seed_set) fail(ErrorKind::parameter, "random baseline requires --seed");
    const auto ks = validated_ks(cfg.ks, {25});
    const auto man_path = require_file(cfg.benign_manifest, "--benign-manifest");
    meta.input("benign_manifest", man_path);
    const auto manifest = read_manifest(man_path);
    meta.param("k", ks);
    meta.param("seed", cfg.seed);
    for (int k : ks) {
        const auto rows = random_baseline(manifest.size(), selection_count(k, manifest.size()), cfg.seed);
        std::string body;
        for (const auto& e : rows_manifest(rows, manifest).entries) body += manifest_line(e) + '\n';
        const auto name = "random_k" + std::to_string(k) + "_seed" + std::to_string(cfg.seed) + ".jsonl";
        emit(out / name, body, meta);
        ctx.out << name << ": " << rows.size() << " of " << manifest.size() << '\n';
    }
    meta.write(out);
    return 0;
}

int cmd_center(const RunConfig& cfg, const Context& ctx) {
    Metadata meta("center", ctx);
    const auto out = prepare_out_dir(cfg.out);
    const auto benign_path = require_file(cfg.benign, "--benign");
    const auto harmful_path = require_file(cfg.harmful, "--harmful");
    meta.input("benign", benign_path);
    meta.input("harmful", harmful_path);
    const auto benign = read_matrix(benign_path);
    const auto harmful = read_matrix(harmful_path);
    auto c = center(benign, harmful);

    std::vector<float> mean(c.mean.begin(), c.mean.end());
    const std::size_t dim = mean.size();
    const EmbeddingMatrix mean_m(1, dim, std::move(mean), benign.axis());
    write_matrix(c.centered_benign, out / "benign.centered.emb1");
    meta.output(out / "benign.centered.emb1");
    write_matrix(c.centered_harmful, out / "harmful.centered.emb1");
    meta.output(out / "harmful.centered.emb1");
    write_matrix(mean_m, out / "mean.emb1");
    meta.output(out / "mean.emb1");

    double mean_norm = 0.0;
    for (double v : c.mean) mean_norm += v * v;
    meta.result("mean_norm", std::sqrt(mean_norm));
    ctx.out << "centered " << benign.rows() << " benign + " << harmful.rows() << " harmful rows; |mean| = "
            << format_double(std::sqrt(mean_norm)) << '\n';
    meta.write(out);
    return 0;
}

int cmd_shift(const RunConfig& cfg, const Context& ctx) {
    Metadata meta("shift", ctx);
    const auto out = prepare_out_dir(cfg.out);
    const auto before_path = require_file(cfg.before, "--before");
    const auto after_path = require_file(cfg.after, "--after");
    meta.input("before", before_path);
    meta.input("after", after_path);
    const auto before = read_matrix(before_path);
    const auto after = read_matrix(after_path);
    std::optional<SampleManifest> manifest;
    if (!cfg.manifest.empty()) {
        const auto man_path = require_file(cfg.manifest, "--manifest");
        meta.input("manifest", man_path);
        manifest = align_manifest(before, read_manifest(man_path)).manifest;
    }
    const auto report = embedding_shift(before, after);
    std::string csv = "row,id,shift\n";
    for (std::size_t i = 0; i < report.per_sample.size(); ++i) {
        csv += std::to_string(i) + ',' + (manifest ? csv_field(manifest->entries[i].id) : std::string()) + ',' +
               format_float(static_cast<float>(report.per_sample[i])) + '\n';
    }
    emit(out / "shift.csv", csv, meta);
    meta.result("mean_shift", report.mean_shift);
    ctx.out << "mean_shift " << format_fixed(report.mean_shift, 6) << '\n';
    meta.write(out);
    return 0;
}

int cmd_pairs(const RunConfig& cfg, const Context& ctx) {
    Metadata meta("pairs", ctx);
    const auto out = prepare_out_dir(cfg.out);
    const Direction direction = parse_direction(cfg.direction);
    auto pair = prepare_geometry(load_pair(cfg, meta, ctx), cfg.center);
    const auto ranking = rank_pair(cfg, pair, meta, ctx);
    record_geometry_params(cfg, ranking, meta);
    meta.param("direction", std::string(to_string(direction)));
    meta.param("top_n", cfg.top_n);
    const auto report =
        nearest_pairs_report(ranking, pair.benign.manifest, pair.harmful.manifest, cfg.top_n, direction);
    for (const auto& w : report.warnings) warn(ctx, meta, w);
    emit(out / "pairs.md", pairs_markdown(report), meta);
    emit(out / "pairs.csv", pairs_csv(report), meta);
    ctx.out << pairs_markdown(report);
    meta.write(out);
    return 0;
}

LayerWindow parse_window(const std::string& spec) {
    const auto dash = spec.find('-');
    try {
        if (dash == std::string::npos) throw std::invalid_argument(spec);
        return LayerWindow{std::stoul(spec.substr(0, dash)), std::stoul(spec.substr(dash + 1))};
    } catch (const std::logic_error&) {
        fail(ErrorKind::parameter, "--window must look like FIRST-LAST (e.g. 20-26), got '" + spec + "'");
    }
}

int cmd_probe(const RunConfig& cfg, const Context& ctx) {
    Metadata meta("probe", ctx);
    const auto out = prepare_out_dir(cfg.out);
    const auto split_path = require_file(cfg.split_manifest, "--split-manifest");
    meta.input("split_manifest", split_path);
    const auto window = parse_window(cfg.window);
    const std::string directions_from = cfg.directions_from.empty() ? cfg.pretrained_tag : cfg.directions_from;
    require_pretrained(directions_from, cfg.pretrained_tag);

    // tag=dir pairs, pretrained first, the rest in flag order.
    std::vector<std::pair<std::string, fs::path>> checkpoints;
    for (const auto& spec : cfg.acts) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) {
            fail(ErrorKind::parameter, "--acts expects TAG=DIR, got '" + spec + "'");
        }
        checkpoints.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
    }
    auto pre = std::find_if(checkpoints.begin(), checkpoints.end(),
                            [&](const auto& c) { return c.first == cfg.pretrained_tag; });
    if (pre == checkpoints.end()) {
        fail(ErrorKind::io, "no --acts entry for pretrained checkpoint '" + cfg.pretrained_tag + "'");
    }
    std::rotate(checkpoints.begin(), pre, pre + 1);
    std::set<std::string> tags;
    for (const auto& [tag, dir] : checkpoints) {
        if (!tags.insert(tag).second) fail(ErrorKind::parameter, "checkpoint tag '" + tag + "' given twice");
    }

    const auto probe_man = read_probe_manifest(split_path);
    const auto pretrained = read_activations(checkpoints.front().second, probe_man.ids, cfg.pretrained_tag);
    const auto dirs = extract_directions(pretrained, probe_man.split);
    for (const auto& w : dirs.warnings) warn(ctx, meta, w);
    meta.param("pretrained_tag", cfg.pretrained_tag);
    meta.param("window", cfg.window);
    meta.param("refused", dirs.refused_count);
    meta.param("complied", dirs.complied_count);

    std::vector<ProjectionCurve> curves;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        const auto& [tag, dir] = checkpoints[i];
        meta.param("acts_" + tag, dir.string());
        const auto acts = i == 0 ? pretrained : read_activations(dir, probe_man.ids, tag);
        auto curve = mean_curve(project(acts, dirs));
        emit(out / ("curve_" + safe_name(tag) + ".csv"), curve_csv(curve), meta);
        curves.push_back(std::move(curve));
    }
    if (curves.size() > 1) {
        emit(out / "deltas.csv", combined_delta_csv(curves), meta);
        nlohmann::ordered_json summary = nlohmann::ordered_json::array();
        for (std::size_t i = 1; i < curves.size(); ++i) {
            const auto d = suppression_delta(curves.front(), curves[i], window);
            summary.push_back({{"checkpoint", d.finetuned_tag},
                               {"window_mean_delta", d.window_mean},
                               {"suppressed", d.suppressed}});
            ctx.out << d.finetuned_tag << ": mean delta over layers " << window.first << "-" << window.last
                    << " = " << format_fixed(d.window_mean, 3) << (d.suppressed ? " (suppressed)" : "") << '\n';
        }
        meta.result("suppression", summary);
    } else if (window.last >= curves.front().mean_projection.size()) {
        fail(ErrorKind::parameter, "layer window exceeds the " +
                                       std::to_string(curves.front().mean_projection.size()) + " available layers");
    }
    meta.write(out);
    return 0;
}

int cmd_eval(const RunConfig& cfg, const Context& ctx) {
    Metadata meta("eval", ctx);
    const auto out = prepare_out_dir(cfg.out);
    if (cfg.responses.empty()) fail(ErrorKind::io, "missing required --responses");
    JudgeConfig judge_cfg = JudgeConfig::defaults();
    if (!cfg.judge_config.empty()) {
        const auto path = require_file(cfg.judge_config, "--judge-config");
        meta.input("judge_config", path);
        judge_cfg = read_judge_config(path);
    }
    judge_cfg.strip_reasoning = judge_cfg.strip_reasoning || cfg.strip_reasoning;
    meta.param("refusal_patterns", judge_cfg.refusal_patterns);
    meta.param("min_response_chars", judge_cfg.min_response_chars);
    meta.param("strip_reasoning", judge_cfg.strip_reasoning);

    // Grouped by (condition, benchmark) in order of first appearance.
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<ResponseRecord>> groups;
    for (const auto& file : cfg.responses) {
        const auto path = require_file(file, "--responses");
        meta.input("responses", path);
        for (auto& r : read_responses(path)) {
            auto key = std::make_pair(r.condition_tag, r.benchmark);
            auto [it, inserted] = groups.try_emplace(key);
            if (inserted) order.push_back(key);
            it->second.push_back(std::move(r));
        }
    }
    if (groups.empty()) fail(ErrorKind::input, "response files contain no records");

    std::vector<JsrReport> reports;
    for (const auto& key : order) {
        auto report = compute_jsr(groups[key], judge_cfg);
        for (const auto& w : report.warnings) warn(ctx, meta, w);
        const auto stem = safe_name(key.first) + "_" + safe_name(key.second);
        emit(out / ("jsr_" + stem + ".json"), jsr_json(report), meta);
        // Per-record verdicts in the probe split-manifest schema.
        std::string verdicts;
        for (const auto& r : groups[key]) {
            nlohmann::ordered_json line{{"id", r.prompt_id},
                                        {"refused", judge(r, judge_cfg) == Verdict::refused}};
            verdicts += line.dump() + '\n';
        }
        emit(out / ("verdicts_" + stem + ".jsonl"), verdicts, meta);
        reports.push_back(std::move(report));
    }
    std::optional<std::string> baseline;
    if (!cfg.baseline.empty()) {
        if (std::none_of(reports.begin(), reports.end(),
                         [&](const auto& r) { return r.condition_tag == cfg.baseline; })) {
            fail(ErrorKind::input, "baseline condition '" + cfg.baseline + "' not found in responses");
        }
        baseline = cfg.baseline;
    }
    meta.param("baseline", cfg.baseline);
    emit(out / "jsr.csv", jsr_csv(reports), meta);
    const auto table = jsr_markdown_table(reports, baseline);
    emit(out / "jsr.md", table, meta);
    ctx.out << table;

    std::vector<DefenseRow> defense;
    for (const auto& r : reports) {
        for (const auto& s : reports) {
            if (s.benchmark == r.benchmark && s.condition_tag == r.condition_tag + std::string(kSysPromptMarker)) {
                defense.push_back(defense_comparison(r, s));
            }
        }
    }
    if (!defense.empty()) {
        const auto md = defense_markdown(defense);
        emit(out / "defense.md", md, meta);
        ctx.out << '\n' << md;
    }
    meta.write(out);
    return 0;
}

int cmd_report(const RunConfig& cfg, const Context& ctx) {
    Metadata meta("report", ctx);
    const auto out = prepare_out_dir(cfg.out);
    if (cfg.rankings.empty() && cfg.jsr_reports.empty()) {
        fail(ErrorKind::io, "report needs --ranking AXIS=PATH and/or --jsr PATH");
    }
    if (cfg.bins == 0) fail(ErrorKind::parameter, "--bins must be positive");
    meta.param("bins", cfg.bins);
    std::string md = "# Proximity and safety report\n";
    for (const auto& spec : cfg.rankings) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) {
            fail(ErrorKind::parameter, "--ranking expects AXIS=PATH, got '" + spec + "'");
        }
        const std::string axis = spec.substr(0, eq);
        const auto path = require_file(spec.substr(eq + 1), "--ranking");
        meta.input("ranking_" + axis, path);
        std::vector<double> d;
        for (const auto& row : read_ranking(path)) d.push_back(row.d_min);
        const auto h = histogram(d, cfg.bins);
        emit(out / ("hist_" + safe_name(axis) + ".csv"), histogram_csv(h), meta);

        md += "\n## d_min distribution: " + axis + " (" + std::to_string(d.size()) + " samples)\n\n";
        md += "| bin | count |\n|---|---|\n";
        const double w = h.bin_width();
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            md += "| " + format_fixed(h.lo + w * static_cast<double>(b), 3) + "-" +
                  format_fixed(h.lo + w * static_cast<double>(b + 1), 3) + " | " + std::to_string(h.counts[b]) +
                  " |\n";
        }
    }
    if (!cfg.jsr_reports.empty()) {
        std::vector<JsrReport> reports;
        for (const auto& file : cfg.jsr_reports) {
            const auto path = require_file(file, "--jsr");
            meta.input("jsr", path);
            reports.push_back(read_jsr_json(path));
        }
        std::optional<std::string> baseline;
        if (!cfg.baseline.empty()) baseline = cfg.baseline;
        const auto table = jsr_markdown_table(reports, baseline);
        emit(out / "jsr_table.md", table, meta);
        emit(out / "jsr_table.csv", jsr_csv(reports), meta);
        md += "\n## Jailbreak success rate\n\n" + table;
    }
    emit(out / "report.md", md, meta);
    ctx.out << md;
    meta.write(out);
    return 0;
}

// Accepts either TOML (CLI11's own reader) or a JSON object whose top-level
// keys are subcommand names. Picked by the first non-blank character.
class TomlOrJsonConfig : public CLI::ConfigTOML {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::string text((std::istreambuf_iterator<char>(input)), std::istreambuf_iterator<char>());
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || text[first] != '{') {
            std::istringstream toml(text);
            return CLI::ConfigTOML::from_config(toml);
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw CLI::ConfigError(std::string("invalid JSON config: ") + e.what());
        }
        std::vector<CLI::ConfigItem> items;
        flatten(doc, {}, items);
        return items;
    }

private:
    static std::string scalar(const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConfigError("unsupported JSON config value " + v.dump());
    }

    static void flatten(const nlohmann::json& obj, const std::vector<std::string>& parents,
                        std::vector<CLI::ConfigItem>& items) {
        if (!obj.is_object()) throw CLI::ConfigError("JSON config must be an object");
        for (const auto& [key, value] : obj.items()) {
            if (value.is_object()) {
                auto p = parents;
                p.push_back(key);
                flatten(value, p, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(value));
            }
            items.push_back(std::move(item));
        }
    }
};

void add_pair_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--benign", cfg.benign, "Benign EMB1 matrix");
    sub->add_option("--benign-manifest", cfg.benign_manifest, "Benign JSONL manifest");
    sub->add_option("--harmful", cfg.harmful, "Harmful reference EMB1 matrix");
    sub->add_option("--harmful-manifest", cfg.harmful_manifest, "Harmful JSONL manifest");
    sub->add_option("--axis", cfg.axis, "semantic | acoustic | mixed | internal");
    sub->add_flag("--center", cfg.center, "Subtract the pooled benign+harmful mean first");
    sub->add_option("--chunk-rows", cfg.chunk_rows, "Benign rows per work unit");
    sub->add_option("--workers", cfg.workers, "Worker threads (0 = all cores)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Embedding-proximity data curation and safety evaluation toolkit", "proxsafe"};
    app.set_version_flag("--version", kToolVersion);
    app.set_config("--config", "", "TOML or JSON run configuration; command-line flags override it");
    app.config_formatter(std::make_shared<TomlOrJsonConfig>());
    app.require_subcommand(1);

    auto* filter = app.add_subcommand("filter", "Rank benign rows by distance to the harmful set and select top-k%");
    add_pair_options(filter, cfg);
    filter->add_option("--k", cfg.ks, "k percentages (comma separated)")->delimiter(',');
    filter->add_option("--direction", cfg.direction, "proximate | distant");
    filter->add_option("--eval-manifest", cfg.eval_manifest, "Warn when these prompts are also harmful references");
    filter->add_option("--out", cfg.out, "Output directory");

    auto* sweep_cmd = app.add_subcommand("sweep", "Selections for a list of k (default 10,20,...,90)");
    add_pair_options(sweep_cmd, cfg);
    sweep_cmd->add_option("--k", cfg.ks, "k percentages (comma separated)")->delimiter(',');
    sweep_cmd->add_option("--direction", cfg.direction, "proximate | distant");
    sweep_cmd->add_option("--eval-manifest", cfg.eval_manifest, "Warn when these prompts are also harmful references");
    sweep_cmd->add_option("--out", cfg.out, "Output directory");

    auto* random = app.add_subcommand("random", "Seeded uniform baseline of the same size as a top-k% selection");
    random->add_option("--benign-manifest", cfg.benign_manifest, "Benign JSONL manifest");
    random->add_option("--k", cfg.ks, "k percentages (comma separated)")->delimiter(',');
    random->add_option("--seed", cfg.seed, "RNG seed")->each([&cfg](const std::string&) { cfg.seed_set = true; });
    random->add_option("--out", cfg.out, "Output directory");

    auto* center_cmd = app.add_subcommand("center", "Subtract the pooled benign+harmful mean");
    center_cmd->add_option("--benign", cfg.benign, "Benign EMB1 matrix");
    center_cmd->add_option("--harmful", cfg.harmful, "Harmful EMB1 matrix");
    center_cmd->add_option("--out", cfg.out, "Output directory");

    auto* shift = app.add_subcommand("shift", "Per-sample cosine distance between paired embeddings");
    shift->add_option("--before", cfg.before, "EMB1 before");
    shift->add_option("--after", cfg.after, "EMB1 after");
    shift->add_option("--manifest", cfg.manifest, "Optional manifest for row ids");
    shift->add_option("--out", cfg.out, "Output directory");

    auto* pairs = app.add_subcommand("pairs", "Closest or farthest benign samples with their nearest harmful prompt");
    add_pair_options(pairs, cfg);
    pairs->add_option("--direction", cfg.direction, "proximate | distant");
    pairs->add_option("--top-n", cfg.top_n, "Rows to report");
    pairs->add_option("--out", cfg.out, "Output directory");

    auto* probe = app.add_subcommand("probe", "Refusal-direction projections across layers");
    probe->add_option("--split-manifest", cfg.split_manifest, "JSONL with id and refused columns");
    probe->add_option("--acts", cfg.acts, "TAG=DIR of layer_<n>.emb1 files (repeatable)");
    probe->add_option("--pretrained-tag", cfg.pretrained_tag, "Checkpoint whose split defines the directions");
    probe->add_option("--directions-from", cfg.directions_from, "Must equal the pretrained tag");
    probe->add_option("--window", cfg.window, "Late-layer window FIRST-LAST (0-based, inclusive)");
    probe->add_option("--out", cfg.out, "Output directory");

    auto* eval = app.add_subcommand("eval", "Judge responses and compute JSR per condition and benchmark");
    eval->add_option("--responses", cfg.responses, "Response JSONL (repeatable)");
    eval->add_option("--judge-config", cfg.judge_config, "Judge JSON config");
    eval->add_option("--baseline", cfg.baseline, "Condition tag the deltas are taken against");
    eval->add_flag("--strip-reasoning", cfg.strip_reasoning, "Judge with <THINK>/<PLANNING> spans removed");
    eval->add_option("--out", cfg.out, "Output directory");

    auto* report = app.add_subcommand("report", "d_min histograms and JSR tables");
    report->add_option("--ranking", cfg.rankings, "AXIS=ranking.jsonl (repeatable)");
    report->add_option("--jsr", cfg.jsr_reports, "JSR report JSON (repeatable)");
    report->add_option("--baseline", cfg.baseline, "Condition tag the deltas are taken against");
    report->add_option("--bins", cfg.bins, "Histogram bins");
    report->add_option("--out", cfg.out, "Output directory");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    const Context ctx{args, out, err};
    try {
        if (*filter) return run_selection(cfg, ctx, "filter", {25});
        if (*sweep_cmd) return run_selection(cfg, ctx, "sweep", {10, 20, 30, 40, 50, 60, 70, 80, 90});
        if (*random) return cmd_random(cfg, ctx);
        if (*center_cmd) return cmd_center(cfg, ctx);
        if (*shift) return cmd_shift(cfg, ctx);
        if (*pairs) return cmd_pairs(cfg, ctx);
        if (*probe) return cmd_probe(cfg, ctx);
        if (*eval) return cmd_eval(cfg, ctx);
        if (*report) return cmd_report(cfg, ctx);
    } catch (const Error& e) {
        err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
        return e.exit_code();
    }
    return 2;
}

}  // namespace proxsafe::cli
