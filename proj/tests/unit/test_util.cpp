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

#include <doctest.h>

#include <atomic>
#include <chrono>
#include <set>
#include <thread>

#include "emocurate/bounded_queue.hpp"
#include "emocurate/checkpoint.hpp"
#include "emocurate/digest.hpp"
#include "emocurate/error.hpp"
#include "emocurate/kv_config.hpp"
#include "emocurate/process.hpp"
#include "emocurate/util.hpp"

using namespace emocurate;
namespace fs = std::filesystem;

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Sha256 h;
  h.update("a").update("bc");
  const auto d = h.finish();
  CHECK(to_hex(d) == sha256_hex("abc"));
  CHECK(digest_seed("abc") == 0xba7816bf8f01cfeaULL);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, 131.2}) {
    CHECK(parse_double(format_double(v), "v") == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK_THROWS_AS(parse_double("1.0x", "v"), Error);
  CHECK_THROWS_AS(parse_int("2.5", "v"), Error);
  CHECK(parse_bool("true", "v"));
  CHECK_FALSE(parse_bool("0", "v"));
}

TEST_CASE("split and trim") {
  CHECK(split("a, b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(trim("  x y \t") == "x y");
  CHECK(join({"a", "b"}, "-") == "a-b");
}

TEST_CASE("key/value config") {
  auto kv = KvConfig::parse("# comment\nworkers.audio = 4\n[vad]\nframe_ms = 20\nname = a b\n");
  CHECK(kv.get_int("workers.audio", 1) == 4);
  CHECK(kv.get_int("vad.frame_ms", 30) == 20);
  CHECK(kv.get_string("vad.name", "") == "a b");
  CHECK(kv.get_double("missing", 1.5) == 1.5);
  CHECK_THROWS_AS(KvConfig::parse("a = 1\na = 2\n"), Error);
  CHECK_THROWS_AS(KvConfig::parse("novalue\n"), Error);
  const auto back = KvConfig::parse(kv.to_text());
  CHECK(back.values() == kv.values());
}

TEST_CASE("atomic writes leave no temp files") {
  TempDir tmp;
  write_file_atomic(tmp.path() / "f.txt", "hello");
  write_file_atomic(tmp.path() / "f.txt", "world");
  CHECK(read_text_file(tmp.path() / "f.txt") == "world");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path())) ++n;
  CHECK(n == 1);
  write_file_atomic(tmp.path() / "made" / "on" / "demand", "x");
  CHECK(read_text_file(tmp.path() / "made" / "on" / "demand") == "x");
  CHECK_THROWS_AS(write_file_atomic(tmp.path() / "f.txt" / "below-a-file", "x"), Error);
}

TEST_CASE("checkpoint files detect corruption") {
  TempDir tmp;
  CheckpointStore store(tmp.path());
  store.put("segments/a.audio", {{"x", 1}});
  CHECK(store.has("segments/a.audio"));
  CHECK(store.get("segments/a.audio")->at("x") == 1);
  CHECK_FALSE(store.get("missing").has_value());
  CHECK(store.verify_all() == 1);

  const auto path = tmp.path() / "segments" / "a.audio.ckpt";
  REQUIRE(fs::exists(path));
  auto text = read_text_file(path);

  SUBCASE("truncated") {
    write_file_atomic(path, text.substr(0, text.size() / 2));
    try {
      store.get("segments/a.audio");
      FAIL("expected integrity error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kIntegrity);
    }
    CHECK_THROWS_AS(store.verify_all(), Error);
  }
  SUBCASE("flipped payload byte") {
    text[text.find('1')] = '2';
    write_file_atomic(path, text);
    CHECK_THROWS_AS(read_checkpoint_file(path), Error);
  }
  SUBCASE("stale temp files are swept") {
    write_file_atomic(tmp.path() / "segments" / "b.ckpt.tmp.123", "junk");
    CHECK(store.verify_all() == 1);
    CHECK_FALSE(fs::exists(tmp.path() / "segments" / "b.ckpt.tmp.123"));
  }
}

TEST_CASE("bounded queue respects capacity and drains after close") {
  BoundedQueue<int> q(3);
  std::atomic<int> produced{0};
  std::thread producer([&] {
    for (int i = 0; i < 100; ++i) {
      q.push(i);
      ++produced;
    }
    q.close();
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  CHECK(produced.load() <= 3);
  std::vector<int> got;
  while (auto v = q.pop()) got.push_back(*v);
  producer.join();
  REQUIRE(got.size() == 100);
  for (int i = 0; i < 100; ++i) CHECK(got[i] == i);
  CHECK(q.high_water() <= 3);
  CHECK_FALSE(q.push(1));
}

TEST_CASE("run_workers rethrows the first failure") {
  std::atomic<int> ran{0};
  CHECK_THROWS_AS(run_workers(4,
                              [&](std::size_t i) {
                                ++ran;
                                if (i == 2) throw std::runtime_error("boom");
                              }),
                  std::runtime_error);
  CHECK(ran.load() == 4);
}

TEST_CASE("process runner") {
  auto r = run_process({"/bin/sh", "-c", "cat; echo err >&2; exit 3"}, "in");
  CHECK(r.exit_code == 3);
  CHECK(r.out == "in");
  CHECK(r.err == "err\n");
  CHECK(find_executable("sh").has_value());
  CHECK_FALSE(find_executable("definitely-not-a-program-xyz").has_value());
}
