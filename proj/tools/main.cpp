// voyagecast: command-line driver for the sailing-duration pipeline.
//
//   voyagecast [--config FILE] [--set key=value]... [--threads N] <command>
//
// Exit status: 0 on success, 1 on validation errors, 2 on I/O errors.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "voyagecast/config.hpp"
#include "voyagecast/error.hpp"
#include "voyagecast/pipeline.hpp"

namespace vc = voyagecast;

namespace {

std::vector<int> parse_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw vc::ConfigError("--horizons: '" + item + "' is not an integer");
    }
  }
  return out;
}

void print_aggregate(const char* label, const vc::eval::Aggregate& a) {
  std::printf("%-11s MAE %.4f h  MAPE %.2f%%\n", label, a.mae, 100.0 * a.mape);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Container-ship sailing duration forecasting"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  long long seed = -1;
  bool dump_config = false;
  app.add_option("-c,--config", config_path, "key=value configuration file");
  app.add_option("--set", overrides, "override one key, e.g. --set model.H=28");
  app.add_option("--threads", threads, "worker threads (results do not depend on it)");
  app.add_option("--seed", seed, "root seed");
  app.add_flag("--print-config", dump_config, "print the resolved configuration first");

  auto* synth = app.add_subcommand("synth", "generate a synthetic world into data.raw_dir");
  auto* preprocess = app.add_subcommand("preprocess", "segment AIS traces into voyage records");
  auto* counts = app.add_subcommand("counts", "per-port relative vessel counts");
  auto* featurize = app.add_subcommand("featurize", "per-segment window series");
  auto* train = app.add_subcommand("train", "fit the model and save the best checkpoint");
  auto* evaluate = app.add_subcommand("evaluate", "score the checkpoint on the test split");
  auto* ablate = app.add_subcommand("ablate", "retrain with one feature group removed at a time");
  auto* attention = app.add_subcommand("attention", "export attention maps of one test sample");
  std::size_t sample = 0;
  attention->add_option("--sample", sample, "index into the test split");
  auto* sweep = app.add_subcommand("sweep", "retrain over horizons and/or the capacity grid");
  std::string horizons;
  bool capacity = false;
  sweep->add_option("--horizons", horizons, "comma-separated horizons, e.g. 28,56,84");
  sweep->add_flag("--capacity", capacity, "also run the 8-row capacity grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (seed >= 0) overrides.push_back("seed=" + std::to_string(seed));
    if (threads > 0) overrides.push_back("exec.threads=" + std::to_string(threads));
    const vc::RunConfig cfg = vc::resolve_config(config_path, overrides);
    if (dump_config) std::cout << vc::render_config(cfg) << std::flush;

    if (synth->parsed()) {
      vc::pipeline::synth(cfg);
      std::printf("world written to %s\n", cfg.data.raw_dir.c_str());
    } else if (preprocess->parsed()) {
      const auto d = vc::pipeline::preprocess(cfg);
      std::printf("points %zu  berthing events %zu  voyages %zu  skipped %zu\n", d.points,
                  d.berthing_events, d.voyages, d.skipped());
    } else if (counts->parsed()) {
      vc::pipeline::counts(cfg);
    } else if (featurize->parsed()) {
      vc::pipeline::featurize(cfg);
    } else if (train->parsed()) {
      const auto fit = vc::pipeline::train(cfg);
      std::printf("best epoch %d  validation loss %.6f%s\n", fit.best_epoch, fit.best_val_loss,
                  fit.diverged ? "  (stopped on divergence)" : "");
    } else if (evaluate->parsed()) {
      const auto r = vc::pipeline::evaluate(cfg);
      print_aggregate("weighted", r.weighted);
      print_aggregate("unweighted", r.unweighted);
    } else if (ablate->parsed()) {
      for (const auto& row : vc::pipeline::ablate(cfg))
        std::printf("%-24s dMAE %+.4f h  dMAPE %+.2f%%\n", row.name.c_str(), row.delta_mae,
                    100.0 * row.delta_mape);
    } else if (attention->parsed()) {
      vc::pipeline::attention(cfg, sample);
    } else if (sweep->parsed()) {
      const auto hs = horizons.empty() ? std::vector<int>{} : parse_list(horizons);
      if (hs.empty() && !capacity) throw vc::ConfigError("sweep needs --horizons and/or --capacity");
      for (const auto& r : vc::pipeline::sweep(cfg, hs, capacity))
        std::printf("%-8s H=%-3d blocks=%d d_emb=%-2d d_model=%-2d  MAE %.4f h  MAPE %.2f%%\n",
                    r.kind.c_str(), r.model.H, r.model.n_block, r.model.d_emb, r.model.d_model,
                    r.weighted.mae, 100.0 * r.weighted.mape);
    }
    return 0;
  } catch (const vc::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const vc::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
