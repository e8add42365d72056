// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// gating failure. Criterion 10 needs user data and never gates.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "brute_force.hpp"
#include "metric_grouper/metric_grouper.hpp"

namespace fs = std::filesystem;
namespace mg = metric_grouper;
using mg::Matrix;
using mg::Vector;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fixture(const std::string& name) { return std::string(MG_FIXTURE_DIR) + "/" + name; }

Vector gaussian(std::mt19937_64& rng, int n, double sd = 1.0) {
  std::normal_distribution<double> g(0, sd);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

struct Outcome {
  bool pass;
  std::string detail;
};

// 1 ---------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0;
  int networks = 0;
  for (; networks < 100; ++networks) {
    const int in = 4 + static_cast<int>(rng() % 5);
    const int depth = 1 + static_cast<int>(rng() % 3);
    std::vector<int> widths;
    for (int m = 0; m < depth; ++m) widths.push_back(2 + static_cast<int>(rng() % 5));
    auto net = mg::make_network(in, widths, mg::Activation::kTanh, 0.0, 1, mg::CompositionMode::kAttention, rng);
    for (auto& l : net.layers) l.b = gaussian(rng, static_cast<int>(l.b.size()), 0.3);
    mg::TrainConfig cfg;
    cfg.margin_t = 0.5 + static_cast<double>(rng() % 100) / 50.0;
    const int label = networks % 2 ? 1 : -1;
    const Vector xi = gaussian(rng, in), xj = gaussian(rng, in);
    const auto g = mg::pair_gradients(net, xi, xj, label, cfg);
    auto objective = [&] { return mg::pair_loss(net, xi, xj, label, cfg).loss + mg::regularizer(net, cfg); };
    const double h = 1e-5;
    auto probe = [&](double& slot, double analytic) {
      const double keep = slot;
      slot = keep + h;
      const double up = objective();
      slot = keep - h;
      const double down = objective();
      slot = keep;
      const double fd = (up - down) / (2 * h);
      // Floor keeps round-off on vanishing entries from dominating.
      worst = std::max(worst, std::abs(analytic - fd) / std::max({1e-7, std::abs(analytic), std::abs(fd)}));
    };
    for (std::size_t m = 0; m < net.layers.size(); ++m) {
      for (Eigen::Index i = 0; i < net.layers[m].W.size(); ++i) probe(net.layers[m].W.data()[i], g.net.W[m].data()[i]);
      for (Eigen::Index i = 0; i < net.layers[m].b.size(); ++i) probe(net.layers[m].b[i], g.net.b[m][i]);
    }
  }
  const double secs = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d networks, max rel err %.2e, %.2f s", networks, worst, secs);
  return {worst < 1e-4 && secs < 30, buf};
}

// 2 ---------------------------------------------------------------------------

Outcome mahalanobis() {
  std::mt19937_64 rng(202);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int in = 1 + static_cast<int>(rng() % 8), out = 1 + static_cast<int>(rng() % 8);
    mg::MetricNetwork net;
    net.layers.push_back({Matrix(out, in), Vector::Zero(out)});
    for (Eigen::Index i = 0; i < net.layers[0].W.size(); ++i) net.layers[0].W.data()[i] = gaussian(rng, 1)[0];
    net.activation = mg::Activation::kIdentity;
    net.attention = mg::AttentionParams::zeros(1);
    const Vector a = gaussian(rng, in), b = gaussian(rng, in);
    const Vector d = a - b;
    const Matrix M = net.layers[0].W.transpose() * net.layers[0].W;
    worst = std::max(worst, std::abs(mg::distance_sq(net, a, b) - d.dot(M * d)));
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "50 linear networks, max abs err %.2e", worst);
  return {worst <= 1e-9, buf};
}

// 3 ---------------------------------------------------------------------------

Outcome attention() {
  std::mt19937_64 rng(303);
  double sum_err = 0, min_w = 1, uniform_err = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 8), n = 1 + static_cast<int>(rng() % 12);
    std::vector<Vector> ctx;
    for (int i = 0; i < n; ++i) ctx.push_back(gaussian(rng, d, 2.0));
    const Vector p = gaussian(rng, d, 2.0);
    const mg::AttentionParams params{gaussian(rng, 2 * d, 2.0)};
    const auto w = mg::attention_weights(ctx, p, params);
    sum_err = std::max(sum_err, std::abs(w.sum() - 1.0));
    min_w = std::min(min_w, w.minCoeff());

    // Equal context vectors, then zero W_a.
    const std::vector<Vector> same(static_cast<std::size_t>(n), ctx.front());
    const auto wu = mg::attention_weights(same, p, params);
    const auto wz = mg::attention_weights(ctx, p, mg::AttentionParams::zeros(d));
    for (int i = 0; i < n; ++i) {
      uniform_err = std::max({uniform_err, std::abs(wu[i] - 1.0 / n), std::abs(wz[i] - 1.0 / n)});
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "1000 draws, |sum-1| %.1e, min weight %.1e, uniform err %.1e", sum_err, min_w,
                uniform_err);
  return {sum_err <= 1e-9 && min_w >= 0 && uniform_err <= 1e-12, buf};
}

// 4 ---------------------------------------------------------------------------

Outcome envelope() {
  bool ok = true;
  int points = 0;
  for (double beta : {1.0, 2.0, 5.0, 20.0}) {
    for (int i = 0; i <= 20000; ++i, ++points) {
      const double w = -10.0 + 20.0 * i / 20000.0;
      const double s = mg::softplus(w, beta);
      const double hinge = std::max(0.0, w);
      if (!(s >= hinge) || !(s - hinge <= std::log(2.0) / beta)) ok = false;
    }
  }
  return {ok, std::to_string(points) + " grid points over 4 betas"};
}

// 5 ---------------------------------------------------------------------------

Outcome fixture_end_to_end() {
  const auto t0 = Clock::now();
  const mg::PipelineConfig cfg;  // defaults, seed 42
  const auto corpus = mg::load_corpus(fixture("corpus.jsonl"));
  const auto table = mg::load_word_vectors(fixture("vectors.txt"));
  const auto tax = mg::load_taxonomy(fixture("taxonomy.jsonl"));
  const auto pairs = mg::generate_pairs(mg::generate_samples(corpus), tax, cfg.pair_options());
  auto net = mg::make_network(cfg.shape, cfg.mode, table.dimension(), cfg.seed);
  const auto result = mg::train(net, pairs, table, cfg.train_config());
  const double first = result.history.front().mean_objective;
  const double last = result.history.back().mean_objective;

  mg::EvalMethod addml{"addml", {cfg.mode, &result.net, cfg.kmeans_options(2, false)}};
  mg::EvalMethod avg{"avg", {mg::CompositionMode::kAvg, nullptr, cfg.kmeans_options(2, true)}};
  const auto a = mg::evaluate_run(corpus, table, addml, 10, cfg.seed);
  const auto b = mg::evaluate_run(corpus, table, avg, 10, cfg.seed);
  const double secs = seconds_since(t0);

  const bool decreased = last < first;
  const bool perfect = a.purity_mean == 1.0 && a.entropy_mean == 0.0;
  const bool beats_avg = a.purity_mean >= b.purity_mean;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "(a) objective %.5f -> %.5f %s; (b) ADDML purity %.4f entropy %.4f %s; (c) AVG purity %.4f %s; %.1f s",
                first, last, decreased ? "ok" : "NO", a.purity_mean, a.entropy_mean, perfect ? "ok" : "NO",
                b.purity_mean, beats_avg ? "ok" : "NO", secs);
  return {decreased && perfect && beats_avg && secs < 120, buf};
}

// 6 ---------------------------------------------------------------------------

Outcome metric_oracles() {
  std::mt19937_64 rng(606);
  int mismatches = 0;
  int configs = 0;
  for (; configs < 200; ++configs) {
    const int n = 1 + static_cast<int>(rng() % 20);
    std::map<std::string, int> assign, gold;
    std::vector<int> cl(n), gr(n);
    for (int i = 0; i < n; ++i) {
      cl[i] = static_cast<int>(rng() % 5);
      gr[i] = static_cast<int>(rng() % 4);
      assign["p" + std::to_string(i)] = cl[i];
      gold["p" + std::to_string(i)] = gr[i];
    }
    // Brute force: for every cluster scan all points for each candidate group.
    int hit = 0;
    double ent = 0;
    for (int k = 0; k < 5; ++k) {
      int nk = 0, best = 0;
      for (int i = 0; i < n; ++i) nk += cl[i] == k;
      if (nk == 0) continue;
      double h = 0;
      for (int g = 0; g < 4; ++g) {
        int c = 0;
        for (int i = 0; i < n; ++i) c += cl[i] == k && gr[i] == g;
        best = std::max(best, c);
        if (c) h -= double(c) / nk * std::log2(double(c) / nk);
      }
      hit += best;
      ent += double(nk) / n * h;
    }
    const auto t = mg::contingency(assign, gold);
    if (mg::purity(t) != double(hit) / n) ++mismatches;
    if (std::abs(mg::entropy(t) - ent) > 1e-12) ++mismatches;
  }
  std::map<std::string, int> assign{{"a", 0}, {"b", 0}, {"c", 0}, {"d", 1}, {"e", 1}};
  std::map<std::string, int> gold{{"a", 0}, {"b", 0}, {"c", 1}, {"d", 1}, {"e", 1}};
  const auto t = mg::contingency(assign, gold);
  const bool hand = std::abs(mg::purity(t) - 0.8) <= 1e-6 && std::abs(mg::entropy(t) - 0.5510) <= 1e-4;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d random tables, %d mismatches; hand case purity %.6f entropy %.6f", configs,
                mismatches, mg::purity(t), mg::entropy(t));
  return {mismatches == 0 && hand, buf};
}

// 7 ---------------------------------------------------------------------------

Outcome kmeans_micro() {
  std::mt19937_64 rng(707);
  int optimal = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 7);
    std::vector<Vector> pts;
    for (int i = 0; i < n; ++i) pts.push_back(gaussian(rng, 2));
    mg::KMeansOptions opt;
    opt.k = 1 + static_cast<int>(rng() % std::min(3, n));
    opt.n_init = 20;
    opt.seed = static_cast<std::uint64_t>(trial);
    const double got = mg::kmeans(pts, opt).inertia;
    if (got <= testutil::optimal_inertia(pts, opt.k) * (1 + 1e-9) + 1e-12) ++optimal;
  }
  return {optimal >= 95, std::to_string(optimal) + "/100 micro instances at the exhaustive optimum"};
}

// 8 ---------------------------------------------------------------------------

struct CliRun {
  int code;
  std::string stdout_text;
};

CliRun run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MG_CLI_PATH) + " " + args + " > " + log.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, mg::read_file(log.string())};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = mg::file_sha256(e.path().string());
  }
  return out;
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / ("mg_acceptance_" + std::to_string(::getpid()));
  const std::string data = " --corpus " + fixture("corpus.jsonl") + " --vectors " + fixture("vectors.txt") +
                           " --taxonomy " + fixture("taxonomy.jsonl") + " --out-dir " + (root / "out").string();
  const std::vector<std::string> commands{
      "validate", "print-config", "split", "pairs", "train", "cluster",
      "cluster --method avg --export-composed --dump-centroids", "eval", "ablate", "run-all"};

  auto pass = [&] {
    fs::remove_all(root);
    fs::create_directories(root / "logs");
    std::vector<std::pair<int, std::string>> outputs;
    std::vector<std::map<std::string, std::string>> states;
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const auto r = run_cli(commands[i] + data, root / "logs" / std::to_string(i));
      outputs.emplace_back(r.code, mg::sha256_hex(r.stdout_text));
      states.push_back(snapshot(root / "out"));
    }
    return std::make_pair(outputs, states);
  };
  const auto first = pass();
  const auto second = pass();
  fs::remove_all(root);

  int failed_exit = 0, differing = 0;
  std::string bad;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (first.first[i].first != 0) ++failed_exit;
    if (first.first[i] != second.first[i] || first.second[i] != second.second[i]) {
      ++differing;
      bad += " [" + commands[i] + "]";
    }
  }
  const auto& files = first.second.back();
  const bool has_manifest = files.count("manifest.json") > 0;
  return {failed_exit == 0 && differing == 0 && has_manifest,
          std::to_string(commands.size()) + " commands run twice, " + std::to_string(files.size()) +
              " files hashed, nonzero exits " + std::to_string(failed_exit) + ", differing " +
              std::to_string(differing) + bad};
}

// 9 ---------------------------------------------------------------------------

mg::AnnotatedCorpus random_corpus(std::mt19937_64& rng, int sentences) {
  static const std::vector<std::string> phrases{"picture", "photo", "image", "sound", "audio", "volume"};
  std::vector<mg::AnnotatedSentence> out;
  for (int s = 0; s < sentences; ++s) {
    mg::AnnotatedSentence sent;
    sent.tokens = {"the", "x", "was", "y", "today"};
    const auto& a = phrases[rng() % phrases.size()];
    const auto& b = phrases[rng() % phrases.size()];
    sent.tokens[1] = a;
    sent.mentions.push_back({a, {1, 2}, std::nullopt});
    if (rng() % 2 && b != a) {
      sent.tokens[3] = b;
      sent.mentions.push_back({b, {3, 4}, std::nullopt});
    }
    out.push_back(sent);
  }
  return mg::AnnotatedCorpus(out);
}

Outcome pair_contracts() {
  const auto tax = mg::load_taxonomy(fixture("taxonomy.jsonl"));
  std::mt19937_64 rng(909);
  std::size_t total = 0, violations = 0;
  int corpora = 0;
  while (total < 2000 && corpora < 500) {
    ++corpora;
    const auto samples = mg::generate_samples(random_corpus(rng, 10 + static_cast<int>(rng() % 40)));
    mg::PairOptions opt;
    opt.seed = rng();
    std::vector<mg::SamplePair> pairs;
    try {
      pairs = mg::generate_pairs(samples, tax, opt);
    } catch (const mg::InsufficientNegativesError&) {
      continue;
    }
    std::size_t pos = 0, neg = 0;
    for (const auto& p : pairs) {
      if (p.label == 1) {
        ++pos;
        if (p.left.phrase != p.right.phrase) ++violations;
      } else {
        ++neg;
        if (!(mg::jcn_similarity(p.left.phrase, p.right.phrase, tax) < opt.eta)) ++violations;
      }
    }
    if (pos != neg) ++violations;
    total += pairs.size();
  }
  return {total >= 1000 && violations == 0, std::to_string(total) + " pairs from " + std::to_string(corpora) +
                                                " random corpora, " + std::to_string(violations) + " violations"};
}

// 10 --------------------------------------------------------------------------

std::optional<Outcome> directional_check() {
  const char* corpus = std::getenv("MG_CRD_CORPUS");
  const char* eval = std::getenv("MG_CRD_EVAL");
  const char* vectors = std::getenv("MG_CRD_VECTORS");
  const char* taxonomy = std::getenv("MG_CRD_TAXONOMY");
  if (!corpus || !eval || !vectors || !taxonomy) return std::nullopt;
  mg::PipelineConfig cfg;
  const auto train_corpus = mg::load_corpus(corpus);
  const auto eval_corpus = mg::load_corpus(eval);
  const auto table = mg::load_word_vectors(vectors);
  const auto tax = mg::load_taxonomy(taxonomy);
  const auto pairs = mg::generate_pairs(mg::generate_samples(train_corpus), tax, cfg.pair_options());
  auto result = mg::train(mg::make_network(cfg.shape, cfg.mode, table.dimension(), cfg.seed), pairs, table,
                          cfg.train_config());
  const int k = mg::gold_group_count(mg::gold_groups(eval_corpus));
  auto score = [&](const std::string& name, mg::CompositionMode mode, const mg::MetricNetwork* net) {
    mg::EvalMethod m{name, {mode, net, cfg.kmeans_options(k, net == nullptr)}};
    return mg::evaluate_run(eval_corpus, table, m, cfg.runs, cfg.seed).purity_mean;
  };
  const double addml = score("addml", cfg.mode, &result.net);
  const double avg = score("avg", mg::CompositionMode::kAvg, nullptr);
  const double ap = score("ap", mg::CompositionMode::kAp, nullptr);
  char buf[128];
  std::snprintf(buf, sizeof buf, "purity ADDML %.4f, AVG %.4f, AP %.4f", addml, avg, ap);
  return Outcome{addml > avg && addml > ap, buf};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_check},
      {"Mahalanobis equivalence", mahalanobis},
      {"attention normalization", attention},
      {"loss envelope", envelope},
      {"synthetic end-to-end", fixture_end_to_end},
      {"metric oracles", metric_oracles},
      {"k-means micro-instance optimality", kmeans_micro},
      {"CLI determinism", cli_determinism},
      {"pair-generation contracts", pair_contracts},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o{false, ""};
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }

  // Optional and never gating.
  try {
    const auto o = directional_check();
    if (!o) {
      std::printf("SKIP 10 data-available directional check: set MG_CRD_CORPUS, MG_CRD_EVAL, MG_CRD_VECTORS and "
                  "MG_CRD_TAXONOMY to run (not gating)\n");
    } else {
      std::printf("%s 10 data-available directional check: %s (not gating)\n", o->pass ? "PASS" : "FAIL",
                  o->detail.c_str());
    }
  } catch (const std::exception& e) {
    std::printf("FAIL 10 data-available directional check: exception: %s (not gating)\n", e.what());
  }
  std::printf("%d of %zu gating criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
