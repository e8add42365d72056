// metric_grouper: group aspect phrases with a learned distance metric.
//
//   metric_grouper validate --corpus c.jsonl --vectors v.txt --taxonomy t.jsonl
//   metric_grouper run-all --config data/fixture/config.ini
//
// Every config key is also a flag of the same name; flags override the file.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "metric_grouper/pipeline.hpp"

namespace mg = metric_grouper;

namespace {

enum Exit : int {
  kOk = 0,
  kFailed = 1,
  kUsage = 2,
  kMissingModel = 3,
  kHashMismatch = 4,
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aspect phrase grouping with a learned deep distance metric"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "INI config file; flags override its values")->check(CLI::ExistingFile);

  std::map<std::string, std::string> flag_values;
  for (const auto& key : mg::config_keys()) {
    app.add_option("--" + key.name, flag_values[key.name], "[" + key.section + "] " + key.help)
        ->group("Config keys");
  }

  auto* validate = app.add_subcommand("validate", "check input files and report counts and coverage");
  auto* split = app.add_subcommand("split", "seeded sentence-level train/test/dev split of --corpus");
  auto* pairs = app.add_subcommand("pairs", "generate distant-supervision pairs -> pairs.jsonl");
  auto* train = app.add_subcommand("train", "train the metric network on pairs.jsonl -> model.json");
  auto* cluster = app.add_subcommand("cluster", "cluster the evaluation corpus -> clusters.tsv");
  auto* eval = app.add_subcommand("eval", "purity and entropy over repeated clusterings -> metrics.json");
  auto* ablate = app.add_subcommand("ablate", "module ablation table -> ablation.json");
  auto* run_all = app.add_subcommand("run-all", "pairs, train, cluster, eval and ablate in one go");
  auto* print_config = app.add_subcommand("print-config", "print the resolved config as INI and its hash");

  mg::Pipeline::ClusterOptions cluster_opt;
  cluster->add_option("--method", cluster_opt.method, "addml|avg|min|max|ap")
      ->check(CLI::IsMember({"addml", "avg", "min", "max", "ap"}));
  cluster->add_flag("--export-composed", cluster_opt.export_composed, "also write composed.tsv");
  cluster->add_flag("--dump-centroids", cluster_opt.dump_centroids, "also write centroids.tsv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    mg::PipelineConfig cfg;
    if (!config_path.empty()) cfg = mg::load_config(config_path);
    for (const auto& key : mg::config_keys()) {
      if (app.count("--" + key.name) == 0) continue;
      try {
        key.set(cfg, flag_values[key.name]);
      } catch (const mg::Error& e) {
        throw mg::ConfigError("--" + key.name + ": " + e.what());
      }
    }
    const mg::Pipeline pipeline(cfg);

    if (*print_config) {
      std::cout << mg::render_ini(pipeline.config()) << "\n; config_hash = " << pipeline.hash() << "\n";
    } else if (*validate) {
      return pipeline.validate(std::cout) ? kOk : kFailed;
    } else if (*split) {
      pipeline.split();
    } else if (*pairs) {
      pipeline.pairs();
    } else if (*train) {
      pipeline.train_model();
    } else if (*cluster) {
      pipeline.cluster(cluster_opt);
    } else if (*eval) {
      pipeline.eval(std::cout);
    } else if (*ablate) {
      pipeline.ablate(std::cout);
    } else if (*run_all) {
      pipeline.run_all(std::cout);
    }
  } catch (const mg::MissingModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissingModel;
  } catch (const mg::HashMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kHashMismatch;
  } catch (const mg::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}
