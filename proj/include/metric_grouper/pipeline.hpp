#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "metric_grouper/ablation.hpp"
#include "metric_grouper/checkpoint.hpp"
#include "metric_grouper/clustering.hpp"
#include "metric_grouper/config.hpp"
#include "metric_grouper/corpus.hpp"
#include "metric_grouper/evaluation.hpp"
#include "metric_grouper/hashing.hpp"
#include "metric_grouper/lexicon.hpp"
#include "metric_grouper/pairgen.hpp"
#include "metric_grouper/trainer.hpp"

namespace metric_grouper {

namespace fs = std::filesystem;

inline constexpr const char* kPairsFile = "pairs.jsonl";
inline constexpr const char* kModelFile = "model.json";
inline constexpr const char* kClustersFile = "clusters.tsv";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kAblationFile = "ablation.json";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kComposedFile = "composed.tsv";
inline constexpr const char* kCentroidsFile = "centroids.tsv";

/// Writes to a sibling temp file and renames it into place, so readers never
/// see a partial file.
inline void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename into '" + path.string() + "': " + ec.message());
  }
}

/// One pipeline step's record in manifest.json.
struct StepRecord {
  std::string name;
  std::vector<std::pair<std::string, std::string>> inputs;  // role, path
  std::vector<std::string> outputs;                         // file names under out-dir
};

/// Shared state for every subcommand: the resolved config and its hash.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg, std::ostream& log = std::cerr)
      : cfg_(std::move(cfg)), hash_(config_hash(cfg_)), log_(log) {
    cfg_.validate();
  }

  const PipelineConfig& config() const { return cfg_; }
  const std::string& hash() const { return hash_; }
  fs::path out(const char* name) const { return fs::path(cfg_.out_dir) / name; }

  // ---- validate --------------------------------------------------------------

  /// Loads every input that is configured and reports counts and problems.
  /// Returns true iff no errors were found.
  bool validate(std::ostream& report) const {
    if (cfg_.corpus.empty() && cfg_.vectors.empty() && cfg_.taxonomy.empty()) {
      throw ConfigError("validate needs at least one of --corpus, --vectors, --taxonomy");
    }
    bool clean = true;
    auto report_issues = [&](const std::string& what, const LoadIssues& issues) {
      for (const auto& e : issues.errors) report << "error: " << what << ": " << e.what() << "\n";
      for (const auto& w : issues.warnings) report << "warning: " << what << ": " << w << "\n";
      clean = clean && issues.clean();
    };
    auto guarded = [&](const std::string& what, auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        report << "error: " << what << ": " << e.what() << "\n";
        clean = false;
      }
    };

    std::optional<AnnotatedCorpus> corpus;
    std::optional<WordVectorTable> table;
    if (!cfg_.corpus.empty()) {
      guarded("corpus", [&] {
        LoadIssues issues;
        corpus = scan_corpus(cfg_.corpus, issues);
        const auto gold = gold_groups(*corpus);
        report << "corpus: " << corpus->sentences().size() << " sentences, " << corpus->phrase_index().size()
               << " aspect phrases, " << corpus->mention_count() << " mentions, " << gold_group_count(gold)
               << " gold groups\n";
        report_issues("corpus", issues);
      });
    }
    if (!cfg_.vectors.empty()) {
      guarded("vectors", [&] {
        LoadIssues issues;
        table = scan_word_vectors(cfg_.vectors, cfg_.unknown_policy, issues);
        report << "vectors: " << table->size() << " entries, dimension " << table->dimension() << "\n";
        report_issues("vectors", issues);
      });
    }
    if (!cfg_.taxonomy.empty()) {
      guarded("taxonomy", [&] {
        LoadIssues issues;
        const auto tax = scan_taxonomy(cfg_.taxonomy, issues);
        report << "taxonomy: " << tax.size() << " concepts, " << tax.word_count() << " words, total count "
               << format_double(tax.total()) << "\n";
        report_issues("taxonomy", issues);
        if (corpus) {
          std::size_t known = 0;
          for (const auto& p : corpus->phrases()) {
            try {
              phrase_concepts(p, tax);
              ++known;
            } catch (const UnknownWordError&) {
            }
          }
          report << "lexicon coverage: " << known << "/" << corpus->phrase_index().size() << " aspect phrases\n";
        }
      });
    }
    if (corpus && table) {
      std::set<std::string> vocab;
      for (const auto& s : corpus->sentences()) vocab.insert(s.tokens.begin(), s.tokens.end());
      std::size_t covered = 0;
      for (const auto& t : vocab) covered += table->contains(t) ? 1 : 0;
      char pct[32];
      std::snprintf(pct, sizeof pct, "%.2f", vocab.empty() ? 100.0 : 100.0 * covered / vocab.size());
      report << "coverage: " << covered << "/" << vocab.size() << " (" << pct << "%)\n";
      if (covered < vocab.size()) {
        report << "warning: " << vocab.size() - covered << " corpus tokens have no vector (policy "
               << to_string(table->unknown_policy()) << ")\n";
      }
    }
    report << (clean ? "status: ok\n" : "status: errors found\n");
    return clean;
  }

  // ---- split -----------------------------------------------------------------

  /// Seeded sentence-level split into train/test/dev corpora.
  void split() const {
    const auto corpus = load_corpus(require_path(cfg_.corpus, "--corpus"));
    const std::size_t n = corpus.sentences().size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg_.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(cfg_.train_ratio * static_cast<double>(n)));
    const auto n_test =
        std::min(n - n_train, static_cast<std::size_t>(std::llround(cfg_.test_ratio * static_cast<double>(n))));
    const std::size_t bounds[] = {0, n_train, n_train + n_test, n};
    const char* names[] = {"train.jsonl", "test.jsonl", "dev.jsonl"};
    StepRecord rec{"split", {{"corpus", cfg_.corpus}}, {}};
    for (int part = 0; part < 3; ++part) {
      std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(bounds[part]),
                                   order.begin() + static_cast<std::ptrdiff_t>(bounds[part + 1]));
      std::sort(ids.begin(), ids.end());
      std::vector<AnnotatedSentence> sents;
      for (auto id : ids) sents.push_back(corpus.sentences()[id]);
      write_atomic(out(names[part]), serialize_corpus(AnnotatedCorpus(std::move(sents))));
      rec.outputs.push_back(names[part]);
      log_ << "split: " << names[part] << " " << ids.size() << " sentences\n";
    }
    record(rec);
  }

  // ---- pairs -----------------------------------------------------------------

  std::vector<SamplePair> pairs() const {
    const auto corpus = load_corpus(require_path(cfg_.corpus, "--corpus"));
    const auto tax = load_taxonomy(require_path(cfg_.taxonomy, "--taxonomy"));
    PairStats stats;
    auto ps = generate_pairs(generate_samples(corpus), tax, cfg_.pair_options(), &stats);
    write_atomic(out(kPairsFile), serialize_pairs(ps, hash_));
    log_ << "pairs: " << stats.positives << " positive, " << stats.negatives << " negative (pool "
         << stats.negative_pool << (stats.negatives_with_replacement ? ", with replacement" : "") << ")\n";
    record({"pairs", {{"corpus", cfg_.corpus}, {"taxonomy", cfg_.taxonomy}}, {kPairsFile}});
    return ps;
  }

  // ---- train -----------------------------------------------------------------

  Checkpoint train_model() const {
    const auto pair_file = load_pairs_checked();
    const auto table = load_table();
    auto net = make_network(cfg_.shape, cfg_.mode, table.dimension(), cfg_.seed);

    DevScorer scorer;
    std::optional<AnnotatedCorpus> dev;
    if (!cfg_.dev_corpus.empty() && cfg_.train.early_stop_patience > 0) {
      dev = load_corpus(cfg_.dev_corpus);
      const int k = resolve_k(*dev);
      scorer = [&, k](const MetricNetwork& n, const WordVectorTable& t) {
        ClusterSpec spec{n.mode, &n, cfg_.kmeans_options(k, false)};
        return purity(cluster_corpus(*dev, t, spec), gold_groups(*dev));
      };
    }
    auto result = train(std::move(net), pair_file.pairs, table, cfg_.train_config(), scorer);
    for (const auto& h : result.history) {
      log_ << "epoch " << h.epoch << ": objective " << format_double(h.mean_objective);
      if (h.dev_score) log_ << ", dev purity " << format_double(*h.dev_score);
      log_ << "\n";
    }
    Checkpoint ck{std::move(result.net), table.dimension(), hash_, std::move(result.tuned_embeddings),
                  std::move(result.history)};
    write_atomic(out(kModelFile), serialize_checkpoint(ck));
    std::vector<std::pair<std::string, std::string>> inputs{{"pairs", out(kPairsFile).string()},
                                                            {"vectors", cfg_.vectors}};
    if (dev) inputs.emplace_back("dev-corpus", cfg_.dev_corpus);
    record({"train", inputs, {kModelFile}});
    return ck;
  }

  // ---- cluster ---------------------------------------------------------------

  struct ClusterOptions {
    std::string method = "addml";
    bool export_composed = false;
    bool dump_centroids = false;
  };

  Clustering cluster(const ClusterOptions& opt) const {
    const auto corpus = load_eval_corpus();
    auto table = load_table();
    std::optional<Checkpoint> ck;
    ClusterSpec spec;
    const int k = resolve_k(corpus);
    if (opt.method == "addml") {
      ck = load_model_checked();
      table = table.with_overrides(ck->embeddings);
      spec = {ck->net.mode, &ck->net, cfg_.kmeans_options(k, false)};
    } else {
      spec = {parse_composition_mode(opt.method), nullptr, cfg_.kmeans_options(k, true)};
    }
    const auto points = cluster_points(corpus, table, spec);
    const auto c = kmeans(points, spec.kmeans);
    StepRecord rec{"cluster", {{"eval-corpus", eval_corpus_path()}, {"vectors", cfg_.vectors}}, {kClustersFile}};
    if (ck) rec.inputs.emplace_back("model", out(kModelFile).string());
    write_atomic(out(kClustersFile), format_clusters_tsv(c, hash_));
    if (opt.export_composed) {
      const AttentionParams att = ck ? ck->net.attention : AttentionParams::zeros(table.dimension());
      write_atomic(out(kComposedFile), format_points_tsv(composed_points(corpus, table, spec.mode, att)));
      rec.outputs.push_back(kComposedFile);
    }
    if (opt.dump_centroids) {
      write_atomic(out(kCentroidsFile), format_centroids_tsv(c));
      rec.outputs.push_back(kCentroidsFile);
    }
    log_ << "cluster: " << points.size() << " phrases into " << k << " clusters (" << opt.method << "), inertia "
         << format_double(c.inertia) << "\n";
    record(rec);
    return c;
  }

  // ---- eval ------------------------------------------------------------------

  std::vector<MethodReport> eval(std::ostream& table_out) const {
    const auto corpus = load_eval_corpus();
    const auto table = load_table();
    const int k = resolve_k(corpus);
    StepRecord rec{"eval", {{"eval-corpus", eval_corpus_path()}, {"vectors", cfg_.vectors}}, {kMetricsFile}};
    std::vector<MethodReport> reports;
    for (const auto& method : cfg_.methods) {
      if (method == "addml") {
        const auto ck = load_model_checked();
        const auto tuned = table.with_overrides(ck.embeddings);
        EvalMethod m{"addml", {ck.net.mode, &ck.net, cfg_.kmeans_options(k, false)}};
        reports.push_back(evaluate_run(corpus, tuned, m, cfg_.runs, cfg_.seed));
        rec.inputs.emplace_back("model", out(kModelFile).string());
      } else {
        EvalMethod m{method, {parse_composition_mode(method), nullptr, cfg_.kmeans_options(k, true)}};
        reports.push_back(evaluate_run(corpus, table, m, cfg_.runs, cfg_.seed));
      }
    }
    write_atomic(out(kMetricsFile), metrics_json(reports, hash_).dump(2) + "\n");
    table_out << metrics_table(reports);
    record(rec);
    return reports;
  }

  // ---- ablate ----------------------------------------------------------------

  std::vector<AblationRow> ablate(std::ostream& table_out) const {
    const auto corpus = load_eval_corpus();
    const auto table = load_table();
    const auto pair_file = load_pairs_checked();
    AblationSettings s;
    s.shape = cfg_.shape;
    s.train = cfg_.train_config();
    s.kmeans = cfg_.kmeans_options(resolve_k(corpus), false);
    s.baseline_metric = cfg_.baseline_metric;
    s.runs = cfg_.runs;
    s.seed = cfg_.seed;
    const auto rows = run_ablation(corpus, table, pair_file.pairs, cfg_.combos, s);
    write_atomic(out(kAblationFile), ablation_json(rows, hash_).dump(2) + "\n");
    table_out << ablation_table(rows);
    record({"ablate",
            {{"eval-corpus", eval_corpus_path()}, {"vectors", cfg_.vectors}, {"pairs", out(kPairsFile).string()}},
            {kAblationFile}});
    return rows;
  }

  /// pairs -> train -> cluster -> eval -> ablate.
  void run_all(std::ostream& report) const {
    pairs();
    train_model();
    cluster({});
    eval(report);
    ablate(report);
  }

 private:
  static const std::string& require_path(const std::string& p, const char* flag) {
    if (p.empty()) throw ConfigError(std::string(flag) + " is required");
    return p;
  }

  const std::string& eval_corpus_path() const {
    return cfg_.eval_corpus.empty() ? require_path(cfg_.corpus, "--corpus or --eval-corpus") : cfg_.eval_corpus;
  }

  AnnotatedCorpus load_eval_corpus() const { return load_corpus(eval_corpus_path()); }

  WordVectorTable load_table() const {
    return load_word_vectors(require_path(cfg_.vectors, "--vectors"), cfg_.unknown_policy);
  }

  /// K from the config, else the number of gold groups in `corpus`.
  int resolve_k(const AnnotatedCorpus& corpus) const {
    if (cfg_.k > 0) return cfg_.k;
    const int g = gold_group_count(gold_groups(corpus));
    if (g == 0) throw ConfigError("--k is required when the corpus carries no gold groups");
    return g;
  }

  void require_hash(const std::string& artifact, const std::string& found) const {
    if (found != hash_) {
      throw HashMismatchError(artifact + " was produced by config " + found + ", current config is " + hash_ +
                              "; rerun the upstream step");
    }
  }

  PairFile load_pairs_checked() const {
    const auto path = out(kPairsFile);
    if (!fs::exists(path)) throw PreconditionError("missing " + path.string() + "; run 'pairs' first");
    auto f = load_pairs(path.string());
    require_hash(path.string(), f.config_hash);
    return f;
  }

  Checkpoint load_model_checked() const {
    const auto path = out(kModelFile);
    if (!fs::exists(path)) throw MissingModelError("missing " + path.string() + "; run 'train' first");
    auto ck = parse_checkpoint(read_file(path.string()));
    require_hash(path.string(), ck.config_hash);
    return ck;
  }

  /// Merges this step into manifest.json. A manifest from another config is replaced.
  void record(const StepRecord& rec) const {
    nlohmann::json m;
    const auto path = out(kManifestFile);
    if (fs::exists(path)) {
      try {
        m = nlohmann::json::parse(read_file(path.string()));
      } catch (const nlohmann::json::exception&) {
        m = nullptr;
      }
      if (!m.is_object() || m.value("config_hash", "") != hash_) m = nullptr;
    }
    if (m.is_null()) {
      m = {{"format", "metric_grouper.manifest"},
           {"version", 1},
           {"config_hash", hash_},
           {"seed", cfg_.seed},
           {"config", canonical_config(cfg_)},
           {"steps", nlohmann::json::object()}};
    }
    nlohmann::json step = {{"inputs", nlohmann::json::object()}, {"outputs", nlohmann::json::object()}};
    for (const auto& [role, p] : rec.inputs) step["inputs"][role] = {{"path", p}, {"sha256", file_sha256(p)}};
    for (const auto& name : rec.outputs) step["outputs"][name] = file_sha256(out(name.c_str()).string());
    m["steps"][rec.name] = std::move(step);
    write_atomic(path, m.dump(2) + "\n");
  }

  PipelineConfig cfg_;
  std::string hash_;
  std::ostream& log_;
};

}  // namespace metric_grouper
