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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <set>

#include "emocurate/dataset.hpp"
#include "emocurate/emotion_map.hpp"
#include "emocurate/error.hpp"
#include "emocurate/eval.hpp"
#include "emocurate/orchestrator.hpp"
#include "emocurate/synthetic.hpp"
#include "emocurate/taxonomy.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace emocurate;

namespace {

PyObject* g_error = nullptr;

EmotionVector to_vector(const std::vector<double>& v) { return EmotionVector::from_values(v); }

AudioBuffer to_buffer(std::vector<double> samples, int rate) {
  AudioBuffer b;
  b.samples = std::move(samples);
  b.sample_rate = rate;
  return b;
}

PipelineConfig config_from(const std::string& text) {
  return PipelineConfig::from_kv(KvConfig::parse(text, "<python>"));
}

std::string ledger_json(const RunResult& r) {
  auto j = r.ledger.to_json();
  j["complete"] = r.complete;
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_emocurate, m) {
  m.doc() = "Emotion annotation pipeline core";

  g_error = PyErr_NewException("emocurate._emocurate.Error", PyExc_RuntimeError, nullptr);
  Py_INCREF(g_error);
  m.add_object("Error", py::handle(g_error));
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(g_error)(e.what());
      inst.attr("kind") = to_string(e.kind());
      inst.attr("field") = e.field();
      PyErr_SetObject(g_error, inst.ptr());
    }
  });

  m.def("categories", [] {
    std::vector<std::string> out;
    for (auto c : canonical_categories()) out.emplace_back(c.name());
    return out;
  });
  m.def(
      "dominant_emotion",
      [](const std::vector<double>& v) { return std::string(dominant_emotion(to_vector(v)).name()); },
      py::arg("intensities"));

  m.def(
      "compute_snr",
      [](std::vector<double> signal, std::vector<double> noise, int rate) {
        return compute_snr(to_buffer(std::move(signal), rate), to_buffer(std::move(noise), rate));
      },
      py::arg("signal"), py::arg("noise"), py::arg("sample_rate") = kCanonicalSampleRate);
  m.def(
      "vad_segment",
      [](std::vector<double> samples, int rate, double threshold_db, int frame_ms, int hangover, double min_speech_s,
         double merge_gap_s) {
        VadConfig cfg;
        cfg.energy_threshold_db = threshold_db;
        cfg.frame_ms = frame_ms;
        cfg.hangover_frames = hangover;
        cfg.min_speech_s = min_speech_s;
        cfg.merge_gap_s = merge_gap_s;
        std::vector<std::pair<double, double>> out;
        for (const auto& s : vad_segment(to_buffer(std::move(samples), rate), cfg)) out.emplace_back(s.start, s.end);
        return out;
      },
      py::arg("samples"), py::arg("sample_rate") = kCanonicalSampleRate, py::arg("threshold_db") = -40.0,
      py::arg("frame_ms") = 30, py::arg("hangover_frames") = 1, py::arg("min_speech_s") = 1.0,
      py::arg("merge_gap_s") = 0.3);

  m.def(
      "fleiss_kappa",
      [](const std::vector<std::vector<std::size_t>>& counts) {
        AgreementTable t;
        t.counts = counts;
        if (!counts.empty()) {
          for (auto c : counts.front()) t.n_raters += c;
          for (std::size_t i = 0; i < counts.front().size(); ++i) t.categories.push_back(std::to_string(i));
        }
        return fleiss_kappa(t);
      },
      py::arg("counts"));
  m.def(
      "accuracy",
      [](const std::string& run_dir, const std::string& gold_path, const std::string& taxonomy,
         const std::set<std::string>& exclude) {
        auto mapping = default_mapping(taxonomy);
        if (!mapping) throw Error(ErrorKind::kConfig, "no built-in mapping named '" + taxonomy + "'", "taxonomy");
        const auto r = accuracy(load_run_predictions(run_dir), GoldSet::load(gold_path), *mapping, exclude);
        py::dict d;
        d["accuracy"] = r.accuracy;
        d["correct"] = r.correct;
        d["scored"] = r.scored;
        d["skipped"] = r.skipped;
        return d;
      },
      py::arg("run_dir"), py::arg("gold"), py::arg("taxonomy") = "meld-7",
      py::arg("exclude") = std::set<std::string>{});

  m.def(
      "perplexity_calibration",
      [](const std::vector<double>& distances, double target) {
        const auto c = perplexity_calibration(distances, target);
        py::dict d;
        d["beta"] = c.beta;
        d["p"] = c.p;
        d["perplexity"] = c.perplexity;
        d["iterations"] = c.iterations;
        return d;
      },
      py::arg("distances"), py::arg("perplexity"));
  m.def(
      "tsne_project",
      [](const std::vector<std::vector<double>>& vectors, const std::vector<std::string>& ids, double perplexity,
         int iterations, std::uint64_t seed) {
        std::vector<EmotionVector> vs;
        for (const auto& v : vectors) vs.push_back(to_vector(v));
        TsneConfig cfg;
        cfg.perplexity = perplexity;
        cfg.iterations = iterations;
        cfg.seed = seed;
        TsneTrace trace;
        const auto pts = tsne_project(vs, ids, cfg, &trace);
        return py::make_tuple(pts, trace.kl);
      },
      py::arg("vectors"), py::arg("ids"), py::arg("perplexity") = 30.0, py::arg("iterations") = 1000,
      py::arg("seed") = 0);

  m.def("write_standard_corpus", [](const fs::path& dir) { return write_standard_corpus(dir); }, py::arg("dir"));
  m.def(
      "run_pipeline",
      [](const std::vector<std::string>& inputs, const std::string& config_text, const fs::path& out_dir) {
        const auto cfg = config_from(config_text);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(inputs, cfg, out_dir);
        }
        return ledger_json(r);
      },
      py::arg("inputs"), py::arg("config") = "", py::arg("out_dir"));
  m.def(
      "resume_pipeline",
      [](const fs::path& checkpoint_dir) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = resume_pipeline(checkpoint_dir);
        }
        return ledger_json(r);
      },
      py::arg("checkpoint_dir"));
  m.def(
      "read_records",
      [](const fs::path& run_dir) {
        std::vector<std::string> out;
        for (const auto& r : read_records(run_dir / "records.jsonl")) out.push_back(nlohmann::json(r).dump());
        return out;
      },
      py::arg("run_dir"));

  m.def(
      "export_dataset",
      [](const fs::path& run_dir, const fs::path& out_dir, double min_duration_s, const std::string& domain) {
        ExportOptions opts;
        opts.min_duration_s = min_duration_s;
        opts.domain = domain;
        const auto rep = export_dataset(run_dir, out_dir, opts);
        py::dict d;
        d["utterances"] = rep.stats.utterance_count;
        d["total_hours"] = rep.stats.total_hours;
        d["excluded"] = rep.excluded;
        return d;
      },
      py::arg("run_dir"), py::arg("out_dir"), py::arg("min_duration_s") = 2.0, py::arg("domain") = "");
  m.def(
      "validate_dataset",
      [](const fs::path& dir) {
        const auto rep = validate_dataset(dir);
        std::vector<std::tuple<std::string, std::string, std::string>> v;
        for (const auto& x : rep.violations) v.emplace_back(x.kind, x.utterance_id, x.message);
        return py::make_tuple(rep.utterances, v);
      },
      py::arg("dataset_dir"));
}
