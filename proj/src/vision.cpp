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

#include "emocurate/vision.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "emocurate/error.hpp"
#include "emocurate/process.hpp"
#include "emocurate/util.hpp"

namespace emocurate {

namespace fs = std::filesystem;

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

std::vector<Detection> MockFaceDetector::detect(const Frame& frame) {
  const int w = frame.width;
  const int h = frame.height;
  std::vector<std::uint8_t> seen(frame.pixels.size(), 0);
  std::vector<Detection> out;
  std::vector<int> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const int start = y0 * w + x0;
      if (seen[start] || frame.pixels[start] < on_level_) continue;
      int minx = x0, maxx = x0, miny = y0, maxy = y0;
      std::size_t area = 0;
      double sum = 0;
      stack.assign(1, start);
      seen[start] = 1;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int x = p % w;
        const int y = p / w;
        ++area;
        sum += frame.pixels[p];
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
        const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (auto [nx, ny] : nb) {
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int q = ny * w + nx;
          if (!seen[q] && frame.pixels[q] >= on_level_) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
      if (area < min_area_) continue;
      out.push_back({Box{double(minx), double(miny), double(maxx - minx + 1), double(maxy - miny + 1)},
                     sum / (255.0 * static_cast<double>(area))});
    }
  }
  return out;
}

std::string encode_pgm(const Frame& f) {
  std::string out = "P5\n" + std::to_string(f.width) + " " + std::to_string(f.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(f.pixels.data()), f.pixels.size());
  return out;
}

Frame decode_pgm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  if (magic != "P5" || w <= 0 || h <= 0 || maxv != 255) throw Error(ErrorKind::kParse, "not an 8-bit binary PGM");
  in.get();
  Frame f{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
  in.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(f.pixels.size())) throw Error(ErrorKind::kParse, "truncated PGM");
  return f;
}

void CommandFaceDetector::check() const {
  if (!find_executable(command_)) throw Error(ErrorKind::kConfig, "detector command not found: " + command_, "detector");
}

std::vector<Detection> CommandFaceDetector::detect(const Frame& frame) {
  TempDir tmp("emocurate-det");
  const auto in = tmp.path() / "frame.pgm";
  write_file_atomic(in, encode_pgm(frame));
  auto res = run_process({command_, in.string()});
  if (res.exit_code != 0) throw Error(ErrorKind::kIo, "detector exited with " + std::to_string(res.exit_code));
  std::vector<Detection> out;
  std::istringstream lines(res.out);
  std::string line;
  while (std::getline(lines, line)) {
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    Detection d;
    if (!(ls >> d.box.x >> d.box.y >> d.box.w >> d.box.h >> d.confidence)) {
      throw Error(ErrorKind::kParse, "expected 'x y w h confidence'", "detector");
    }
    out.push_back(d);
  }
  return out;
}

std::vector<FaceBox> detect_faces(const FrameSequence& frames, FaceDetector& det, double min_confidence,
                                  std::size_t stride, const std::string& context) {
  if (frames.empty()) throw Error(ErrorKind::kPrecondition, "no frames to search", context);
  stride = std::max<std::size_t>(1, stride);
  std::vector<FaceBox> out;
  for (std::size_t i = 0; i < frames.size(); i += stride) {
    const Frame f = frames.frame(i);
    std::vector<Detection> dets;
    try {
      dets = det.detect(f);
    } catch (const std::exception& e) {
      throw StageError(DropReason::kDetectionFailed, det.name() + ": " + e.what(), context);
    }
    for (const auto& d : dets) {
      if (!std::isfinite(d.confidence) || d.confidence < 0 || d.confidence > 1) {
        throw StageError(DropReason::kDetectionFailed, det.name() + ": confidence outside [0, 1]", context);
      }
      if (d.confidence < min_confidence) continue;
      const double x0 = std::clamp(d.box.x, 0.0, double(f.width));
      const double y0 = std::clamp(d.box.y, 0.0, double(f.height));
      const double x1 = std::clamp(d.box.x + d.box.w, 0.0, double(f.width));
      const double y1 = std::clamp(d.box.y + d.box.h, 0.0, double(f.height));
      if (x1 <= x0 || y1 <= y0) continue;
      out.push_back({frames.first_index() + i, Box{x0, y0, x1 - x0, y1 - y0}, d.confidence});
    }
  }
  return out;
}

std::vector<FaceTrack> link_tracks(std::vector<FaceBox> boxes, const TrackingConfig& cfg) {
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const FaceBox& a, const FaceBox& b) { return a.frame_index < b.frame_index; });
  std::vector<FaceTrack> tracks;
  std::vector<bool> open;
  std::size_t i = 0;
  while (i < boxes.size()) {
    const std::size_t frame = boxes[i].frame_index;
    std::size_t j = i;
    while (j < boxes.size() && boxes[j].frame_index == frame) ++j;

    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (open[t] && frame - tracks[t].boxes.back().frame_index > cfg.max_gap) open[t] = false;
    }
    struct Cand {
      double iou;
      std::size_t track;
      std::size_t box;
    };
    std::vector<Cand> cands;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (!open[t]) continue;
      for (std::size_t b = i; b < j; ++b) {
        const double v = iou(tracks[t].boxes.back().box, boxes[b].box);
        if (v >= cfg.iou_threshold && v > 0) cands.push_back({v, t, b});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.track != b.track) return a.track < b.track;
      return a.box < b.box;
    });
    std::vector<bool> track_used(tracks.size(), false);
    std::vector<bool> box_used(j - i, false);
    for (const auto& c : cands) {
      if (track_used[c.track] || box_used[c.box - i]) continue;
      track_used[c.track] = true;
      box_used[c.box - i] = true;
      tracks[c.track].boxes.push_back(boxes[c.box]);
    }
    for (std::size_t b = i; b < j; ++b) {
      if (box_used[b - i]) continue;
      FaceTrack t;
      t.track_id = static_cast<int>(tracks.size());
      t.boxes.push_back(boxes[b]);
      tracks.push_back(std::move(t));
      open.push_back(true);
    }
    i = j;
  }
  return tracks;
}

std::vector<double> ScriptedScorer::score(const FaceTrack& track, const AudioBuffer&) {
  auto it = scripts_.find(track.track_id);
  if (it == scripts_.end() || it->second.empty()) {
    throw Error(ErrorKind::kConfig, "no script for track " + std::to_string(track.track_id));
  }
  std::vector<double> out(track.boxes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = it->second[i % it->second.size()];
  return out;
}

std::vector<double> ConfidenceScorer::score(const FaceTrack& track, const AudioBuffer&) {
  std::vector<double> out;
  out.reserve(track.boxes.size());
  for (const auto& b : track.boxes) out.push_back(b.confidence);
  return out;
}

const char* to_string(SelectionReason r) noexcept {
  switch (r) {
    case SelectionReason::kSelected: return "selected";
    case SelectionReason::kNoFace: return "no-face";
    case SelectionReason::kBelowThreshold: return "below-threshold";
    case SelectionReason::kMultiAmbiguous: return "multi-ambiguous";
  }
  return "unknown";
}

DropReason drop_reason_for(SelectionReason r) {
  switch (r) {
    case SelectionReason::kNoFace: return DropReason::kNoFace;
    case SelectionReason::kBelowThreshold: return DropReason::kBelowThreshold;
    case SelectionReason::kMultiAmbiguous: return DropReason::kMultiAmbiguous;
    case SelectionReason::kSelected: break;
  }
  throw Error(ErrorKind::kPrecondition, "a selected speaker is not a drop");
}

SpeakerSelection select_speaker(std::vector<FaceTrack>& tracks, ActiveSpeakerScorer& scorer, const AudioBuffer& audio,
                                const SelectionConfig& cfg, const std::string& context) {
  SpeakerSelection sel;
  if (tracks.empty()) return sel;
  std::vector<double> means;
  for (auto& t : tracks) {
    try {
      t.speaker_scores = scorer.score(t, audio);
    } catch (const std::exception& e) {
      throw StageError(DropReason::kScoringFailed, scorer.name() + ": " + e.what(), context);
    }
    if (t.speaker_scores.size() != t.boxes.size() || t.boxes.empty()) {
      throw StageError(DropReason::kScoringFailed, scorer.name() + ": scores not aligned to boxes", context);
    }
    for (double s : t.speaker_scores) {
      if (!(s >= 0.0 && s <= 1.0)) throw StageError(DropReason::kScoringFailed, scorer.name() + ": score outside [0, 1]", context);
    }
    means.push_back(std::accumulate(t.speaker_scores.begin(), t.speaker_scores.end(), 0.0) /
                    static_cast<double>(t.speaker_scores.size()));
  }
  std::vector<std::size_t> order(tracks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
  sel.mean_score = means[order[0]];
  if (sel.mean_score < cfg.min_mean) {
    sel.reason = SelectionReason::kBelowThreshold;
  } else if (order.size() > 1 && sel.mean_score - means[order[1]] < cfg.ambiguity_margin) {
    sel.reason = SelectionReason::kMultiAmbiguous;
  } else {
    sel.reason = SelectionReason::kSelected;
    sel.chosen_track = tracks[order[0]].track_id;
  }
  return sel;
}

CropBundle write_crops(const fs::path& dir, const FrameSequence& frames, const FaceTrack& track, std::size_t stride) {
  stride = std::max<std::size_t>(1, stride);
  CropBundle bundle;
  bundle.dir = dir;
  fs::create_directories(dir);
  std::string index = "frame_index\tfile\n";
  for (std::size_t k = 0; k < track.boxes.size(); k += stride) {
    const auto& fb = track.boxes[k];
    if (fb.frame_index < frames.first_index() || fb.frame_index >= frames.first_index() + frames.size()) {
      throw Error(ErrorKind::kRange, "box outside the clip's frames", dir.string());
    }
    const Frame src = frames.frame(fb.frame_index - frames.first_index());
    const int x0 = static_cast<int>(std::floor(fb.box.x));
    const int y0 = static_cast<int>(std::floor(fb.box.y));
    const int x1 = std::min(src.width, static_cast<int>(std::ceil(fb.box.x + fb.box.w)));
    const int y1 = std::min(src.height, static_cast<int>(std::ceil(fb.box.y + fb.box.h)));
    Frame crop{x1 - x0, y1 - y0, {}};
    crop.pixels.reserve(static_cast<std::size_t>(crop.width) * crop.height);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) crop.pixels.push_back(src.at(x, y));
    }
    std::string name = std::to_string(fb.frame_index);
    if (name.size() < 6) name.insert(0, 6 - name.size(), '0');
    name += ".pgm";
    write_file_atomic(dir / name, encode_pgm(crop));
    bundle.entries.push_back({fb.frame_index, name});
    index += std::to_string(fb.frame_index) + "\t" + name + "\n";
  }
  write_file_atomic(dir / "index.tsv", index);
  return bundle;
}

CropBundle read_crop_index(const fs::path& dir) {
  CropBundle bundle;
  bundle.dir = dir;
  auto lines = read_lines(dir / "index.tsv");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto parts = split(lines[i], '\t');
    if (parts.size() != 2) throw Error(ErrorKind::kParse, "bad crop index line", (dir / "index.tsv").string());
    bundle.entries.push_back({static_cast<std::size_t>(parse_int(parts[0], "frame_index")), parts[1]});
  }
  return bundle;
}

}  // namespace emocurate
