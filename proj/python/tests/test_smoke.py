import json
import math
import os
import subprocess

import pytest

import emocurate


def test_categories():
    names = emocurate.categories()
    assert len(names) == 26
    assert names == sorted(names)
    assert "Joy" in names and "Empathic pain" in names


def test_dominant_emotion_ties_go_to_lowest_index():
    v = [0.0] * 26
    v[3] = 0.7
    v[5] = 0.7
    assert emocurate.dominant_emotion(v) == emocurate.categories()[3]


def test_error_carries_kind():
    with pytest.raises(emocurate.Error) as info:
        emocurate.dominant_emotion([0.0] * 25)
    assert info.value.kind == "range"


def test_fleiss_kappa_textbook_table():
    table = [
        [0, 0, 0, 0, 14], [0, 2, 6, 4, 2], [0, 0, 3, 5, 6], [0, 3, 9, 2, 0], [2, 2, 8, 1, 1],
        [7, 7, 0, 0, 0], [3, 2, 6, 3, 0], [2, 5, 3, 2, 2], [6, 5, 2, 1, 0], [0, 2, 2, 3, 7],
    ]
    assert emocurate.fleiss_kappa(table) == pytest.approx(0.20993, abs=5e-5)


def test_snr_matches_power_ratio():
    signal = [math.sin(2 * math.pi * 440 * i / 16000) for i in range(16000)]
    noise = [0.1 * (1 if i % 2 else -1) for i in range(16000)]
    expected = 10 * math.log10((sum(s * s for s in signal) / 16000) / 0.01)
    assert emocurate.compute_snr(signal, noise) == pytest.approx(expected, abs=1e-9)


def test_vad_finds_a_tone_between_silences():
    rate = 16000
    samples = [0.0] * rate + [0.3 * math.sin(2 * math.pi * 300 * i / rate) for i in range(2 * rate)] + [0.0] * rate
    spans = emocurate.vad_segment(samples)
    assert len(spans) == 1
    start, end = spans[0]
    assert abs(start - 1.0) < 0.031
    assert 3.0 <= end <= 3.0 + 0.03 * 2 + 1e-9


def test_perplexity_calibration_hits_target():
    distances = [0.1 * i for i in range(1, 40)]
    cal = emocurate.perplexity_calibration(distances, 10.0)
    assert cal["perplexity"] == pytest.approx(10.0, abs=1e-4)
    assert sum(cal["p"]) == pytest.approx(1.0, abs=1e-12)


def test_tsne_separates_two_clusters():
    vectors, ids = [], []
    for i in range(20):
        v = [0.0] * 26
        v[0 if i < 10 else 25] = 0.9
        v[(i % 5) + 5] = 0.05 * (i % 3)
        vectors.append(v)
        ids.append(f"p{i:02d}")
    points, kl = emocurate.tsne_project(vectors, ids, perplexity=5.0, iterations=500, seed=7)
    assert len(points) == 20 and len(kl) == 500
    centre = [sum(p[0] for p in points[:10]) / 10, sum(p[1] for p in points[:10]) / 10]
    for i, p in enumerate(points):
        d = math.hypot(p[0] - centre[0], p[1] - centre[1])
        other = [sum(q[0] for q in points[10:]) / 10, sum(q[1] for q in points[10:]) / 10]
        e = math.hypot(p[0] - other[0], p[1] - other[1])
        assert (d < e) == (i < 10)


def test_pipeline_export_validate(tmp_path):
    inputs = emocurate.write_standard_corpus(tmp_path / "corpus")
    ledger = emocurate.run_pipeline(inputs, tmp_path / "run", "workers.analysis = 2\n")
    assert ledger["complete"]
    assert ledger["segments_annotated"] + ledger["segments_dropped"] == ledger["segments_ingested"]
    records = emocurate.read_records(tmp_path / "run")
    assert len(records) == ledger["segments_annotated"] > 0

    again = emocurate.resume_pipeline(tmp_path / "run" / "checkpoint")
    assert again["segments_annotated"] == ledger["segments_annotated"]

    report = emocurate.export_dataset(tmp_path / "run", tmp_path / "ds", domain="synthetic")
    utterances, violations = emocurate.validate_dataset(tmp_path / "ds")
    assert violations == []
    assert utterances == report["utterances"] > 0


def test_unfinished_run_cannot_export(tmp_path):
    with pytest.raises(emocurate.Error) as info:
        emocurate.export_dataset(tmp_path / "missing", tmp_path / "ds")
    assert info.value.kind == "precondition"


@pytest.mark.skipif(not os.environ.get("EMOCURATE_CLI"), reason="CLI path not provided")
def test_cli_round_trip(tmp_path):
    cli = os.environ["EMOCURATE_CLI"]
    subprocess.run([cli, "synth", "--out", str(tmp_path / "corpus")], check=True, capture_output=True)
    subprocess.run([cli, "run", "--inputs", str(tmp_path / "corpus" / "inputs.txt"), "--out", str(tmp_path / "run")],
                   check=True, capture_output=True)
    ledger = json.loads((tmp_path / "run" / "ledger.json").read_text())
    assert ledger["segments_annotated"] > 0
    subprocess.run([cli, "export", "--run", str(tmp_path / "run"), "--out", str(tmp_path / "ds")],
                   check=True, capture_output=True)
    done = subprocess.run([cli, "validate", "--dataset", str(tmp_path / "ds")], capture_output=True, text=True)
    assert done.returncode == 0, done.stdout + done.stderr
