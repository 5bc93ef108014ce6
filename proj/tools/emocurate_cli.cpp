// Copyright 2026 The emocurate Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pthread.h>

#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "emocurate/dataset.hpp"
#include "emocurate/emotion_map.hpp"
#include "emocurate/error.hpp"
#include "emocurate/eval.hpp"
#include "emocurate/orchestrator.hpp"
#include "emocurate/review.hpp"
#include "emocurate/synthetic.hpp"
#include "emocurate/util.hpp"

namespace fs = std::filesystem;
using namespace emocurate;

namespace {

LegacyMapping pick_mapping(const std::string& spec, const std::string& taxonomy) {
  if (!fs::exists(spec)) {
    if (auto m = default_mapping(spec)) return *m;
    throw Error(ErrorKind::kIo, "no mapping file or built-in taxonomy named '" + spec + "'", "--mapping");
  }
  const auto all = LegacyMapping::load(spec);
  if (all.empty()) throw Error(ErrorKind::kConfig, "mapping file defines no taxonomy", spec);
  if (taxonomy.empty()) return all.front();
  for (const auto& m : all) {
    if (m.taxonomy() == taxonomy) return m;
  }
  throw Error(ErrorKind::kConfig, "mapping file has no section for " + taxonomy, spec);
}

std::set<std::string> split_set(const std::string& s) {
  std::set<std::string> out;
  for (auto& p : split(s, ',')) {
    if (!p.empty()) out.insert(p);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotional speech dataset curation pipeline"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run the pipeline over a list of media files");
  std::string inputs_file, config_file, out_dir;
  run->add_option("--inputs", inputs_file, "File with one media path per line")->required();
  run->add_option("--config", config_file, "Key/value pipeline config");
  run->add_option("--out", out_dir, "Output directory")->required();

  auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
  std::string checkpoint_dir;
  resume->add_option("--checkpoint", checkpoint_dir, "Checkpoint directory of the run")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Scoring against gold labels and agreement statistics");
  ev->require_subcommand(1);
  auto* acc = ev->add_subcommand("accuracy", "Dominant-emotion accuracy against legacy gold labels");
  std::string run_dir, gold_file, mapping = "meld-7", exclude, taxonomy, confusion_mode;
  acc->add_option("--run", run_dir, "Run directory")->required();
  acc->add_option("--gold", gold_file, "Gold label file")->required();
  acc->add_option("--mapping", mapping, "Mapping file or built-in taxonomy name")->required();
  acc->add_option("--taxonomy", taxonomy, "Section of the mapping file to use");
  acc->add_option("--exclude", exclude, "Comma-separated labels to leave out");
  acc->add_option("--confusion", confusion_mode, "Also print a confusion matrix")->check(CLI::IsMember({"legacy", "native"}));
  auto* kap = ev->add_subcommand("kappa", "Fleiss' kappa across repeated runs");
  std::string runs;
  kap->add_option("--runs", runs, "Comma-separated run directories")->required();
  auto* rat = ev->add_subcommand("rationality", "Share of annotations judged reasonable");
  std::string ratings_file;
  rat->add_option("--ratings", ratings_file, "Ratings file")->required();

  // map
  auto* mp = app.add_subcommand("map", "Project annotations to 2-D for plotting");
  TsneConfig tcfg;
  std::string map_out, palette_file;
  mp->add_option("--run", run_dir, "Run directory")->required();
  mp->add_option("--seed", tcfg.seed, "Seed");
  mp->add_option("--perplexity", tcfg.perplexity, "Target perplexity");
  mp->add_option("--iterations", tcfg.iterations, "Gradient steps");
  mp->add_option("--learning-rate", tcfg.learning_rate, "Step size");
  mp->add_option("--palette", palette_file, "Palette file");
  mp->add_option("--out", map_out, "Output file")->required();

  auto* pal = app.add_subcommand("palette", "Write the default category palette");
  std::string pal_out;
  pal->add_option("--out", pal_out, "Output file")->required();

  // dataset
  auto* ex = app.add_subcommand("export", "Package a finished run as a dataset");
  ExportOptions eopts;
  ex->add_option("--run", run_dir, "Run directory")->required();
  ex->add_option("--out", out_dir, "Dataset directory")->required();
  ex->add_option("--domain", eopts.domain, "Free-text domain tag");
  ex->add_option("--min-duration", eopts.min_duration_s, "Minimum utterance length in seconds");
  auto* va = app.add_subcommand("validate", "Check an exported dataset");
  std::string dataset_dir;
  va->add_option("--dataset", dataset_dir, "Dataset directory")->required();

  // review
  auto* rs = app.add_subcommand("review-serve", "Serve a rationality review campaign over HTTP");
  ReviewOptions ropts;
  std::string host = "127.0.0.1", raters;
  int port = 8080;
  rs->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  rs->add_option("--n", ropts.n, "Number of samples");
  rs->add_option("--seed", ropts.seed, "Seed");
  rs->add_option("--port", port, "Port");
  rs->add_option("--host", host, "Address to bind");
  rs->add_option("--raters", raters, "Comma-separated rater roster (default: open)");
  rs->add_option("--state", ropts.state_dir, "Directory for ratings (default: <dataset>/review)");

  auto* sy = app.add_subcommand("synth", "Write the synthetic test corpus and an input list");
  sy->add_option("--out", out_dir, "Directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = config_file.empty() ? PipelineConfig{} : PipelineConfig::load(config_file);
      const auto res = run_pipeline(read_input_list(inputs_file), cfg, out_dir);
      std::cout << res.ledger.summary_text();
      return 0;
    }
    if (*resume) {
      const auto res = resume_pipeline(checkpoint_dir);
      std::cout << res.ledger.summary_text();
      return 0;
    }
    if (*acc) {
      const auto gold = GoldSet::load(gold_file);
      const auto m = pick_mapping(mapping, taxonomy.empty() ? gold.taxonomy : taxonomy);
      const auto preds = load_run_predictions(run_dir);
      const auto r = accuracy(preds, gold, m, split_set(exclude));
      std::cout << "accuracy " << format_double(r.accuracy) << "\nscored " << r.scored << "\ncorrect " << r.correct
                << "\nskipped " << r.skipped << "\n";
      if (!confusion_mode.empty()) {
        const auto cm = confusion(preds, gold, m, split_set(exclude),
                                  confusion_mode == "native" ? ConfusionColumns::kNative : ConfusionColumns::kLegacy);
        std::cout << "gold\\predicted";
        for (const auto& c : cm.col_labels) std::cout << '\t' << c;
        std::cout << '\n';
        for (std::size_t i = 0; i < cm.row_labels.size(); ++i) {
          std::cout << cm.row_labels[i];
          for (auto v : cm.counts[i]) std::cout << '\t' << v;
          std::cout << '\n';
        }
      }
      return 0;
    }
    if (*kap) {
      std::vector<Predictions> all;
      for (const auto& d : split(runs, ',')) all.push_back(load_run_predictions(d));
      const auto t = runs_to_table(all);
      std::cout << "kappa " << format_double(fleiss_kappa(t)) << "\nitems " << t.counts.size() << "\nraters "
                << t.n_raters << "\n";
      return 0;
    }
    if (*rat) {
      const auto r = rationality_rate(load_ratings(ratings_file));
      std::cout << "rate " << format_double(r.rate) << "\nreasonable " << r.reasonable << "\ntotal " << r.total << "\n";
      for (const auto& [c, b] : r.by_category) {
        std::cout << "category " << c << ' ' << b.reasonable << '/' << b.total << ' ' << format_double(b.rate()) << '\n';
      }
      return 0;
    }
    if (*mp) {
      std::vector<std::string> ids;
      std::vector<EmotionVector> vecs;
      for (const auto& [id, v] : load_run_predictions(run_dir)) {
        ids.push_back(id);
        vecs.push_back(v);
      }
      const auto palette = palette_file.empty() ? default_palette() : load_palette(palette_file);
      export_map(build_map(ids, vecs, tcfg, palette), map_out);
      std::cout << "wrote " << ids.size() << " points to " << map_out << "\n";
      return 0;
    }
    if (*pal) {
      write_file_atomic(pal_out, palette_to_text(default_palette()));
      return 0;
    }
    if (*ex) {
      const auto rep = export_dataset(run_dir, out_dir, eopts);
      std::cout << stats_to_text(rep.stats);
      for (const auto& [id, why] : rep.excluded) std::cout << "excluded " << id << ": " << why << "\n";
      return 0;
    }
    if (*va) {
      const auto rep = validate_dataset(dataset_dir);
      std::cout << rep.to_text();
      return rep.ok() ? 0 : 1;
    }
    if (*rs) {
      ropts.raters = split_set(raters);
      ReviewService svc(dataset_dir, ropts);
      ReviewServer server(svc);
      // Server threads inherit the blocked mask; a dedicated thread waits for
      // SIGINT/SIGTERM and shuts the server down.
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      std::jthread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
      });
      std::cout << "serving " << svc.samples().size() << " samples on http://" << host << ":" << port << "\n" << std::flush;
      try {
        server.listen(host, port);
      } catch (...) {
        pthread_kill(waiter.native_handle(), SIGTERM);
        throw;
      }
      return 0;
    }
    if (*sy) {
      std::string list;
      for (const auto& p : write_standard_corpus(out_dir)) list += fs::absolute(p).string() + "\n";
      write_file_atomic(fs::path(out_dir) / "inputs.txt", list);
      std::cout << "wrote " << (fs::path(out_dir) / "inputs.txt").string() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << ")";
    if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
    std::cerr << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
