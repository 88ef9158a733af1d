import json

import pytest

from suzuki_tower import pipeline as PL
from suzuki_tower.cache import Cache, CacheError, cache_key
from suzuki_tower.report import FAIL, INFO, PASS, Check, DuplicateCheckError, VerificationReport


def test_cache_roundtrip_and_tamper(tmp_path):
    c = Cache(tmp_path)
    c.write("a/b.txt", "hello\n")
    c.write_json("m.json", {"x": [1, 2]})
    again = Cache(tmp_path)
    assert again.read("a/b.txt") == "hello\n" and again.read_json("m.json") == {"x": [1, 2]}
    assert again.read("absent") is None
    (tmp_path / "a" / "b.txt").write_text("hellO\n")
    with pytest.raises(CacheError, match="b.txt"):
        again.read("a/b.txt")
    (tmp_path / "a" / "b.txt").unlink()
    with pytest.raises(CacheError, match="missing"):
        again.read("a/b.txt")
    again.discard("a/b.txt")
    assert not again.has("a/b.txt")


def test_unreadable_manifest(tmp_path):
    (tmp_path / "manifest.json").write_text("{")
    with pytest.raises(CacheError):
        Cache(tmp_path)


def test_cache_key_is_stable():
    assert cache_key("a", 1) == cache_key("a", "1")
    assert cache_key("a", 1) != cache_key("a", 2) and len(cache_key("x")) == 16


def test_report_rendering():
    r = VerificationReport()
    r.add(Check("x.one", "first", (1, 2), [1, 2], PASS, runtime=3.5))
    r.add(Check("x.two", "second", None, {"b": 1, "a": 2}, INFO))
    assert r.ok and r.counts() == {PASS: 1, INFO: 1}
    assert r.to_tsv().splitlines()[1] == "x.one\tfirst\t[1,2]\t[1,2]\tPASS"
    assert '{"a":2,"b":1}' in r.to_tsv()
    assert "3.5" not in r.to_tsv() and "x.one\t3.500" in r.timings_tsv()
    assert json.loads(r.to_json())["status"] == PASS
    with pytest.raises(DuplicateCheckError):
        r.add(Check("x.one", "again", 0, 0, PASS))
    r.add(Check("x.three", "broken", 1, 2, FAIL))
    assert not r.ok and json.loads(r.render("json"))["status"] == FAIL


def test_config_validation():
    with pytest.raises(ValueError):
        PL.PipelineConfig(seed=0)
    with pytest.raises(ValueError):
        PL.PipelineConfig(fmt="xml")


def test_name_aliases():
    assert PL.canonical_name("h2d") == "H2D" and PL.canonical_name("gval") == "GVAL"
    with pytest.raises(KeyError):
        PL.canonical_name("nope")


def test_interrupted_enumeration_resumes(tmp_path):
    from suzuki_tower import valuations as V

    ws = PL.Workspace(PL.PipelineConfig(cache_dir=tmp_path))
    g = ws.geometry("H2D")
    rel = f"vals/H2D-{g.digest()[:16]}.vals"
    partial = ws.cache.path(rel + ".partial")
    partial.parent.mkdir(parents=True)
    # pretend roots 0..9 finished before the interruption
    lines = [f"VALS-PARTIAL v1 {g.digest()}"]
    for root in range(10):
        vecs = V._RootedSearch(g, V._line_partners(g)).run(root)
        lines.append(f"root {root} {len(vecs)}")
        lines += [" ".join(map(str, v)) for v in vecs]
    partial.write_text("\n".join(lines) + "\n")
    vals, types = ws.valuations("H2D")
    assert len(vals) == 1575 and not partial.exists()
    assert vals == V.enumerate_valuations(g)


@pytest.mark.slow
def test_full_pipeline_is_green_and_deterministic(ws):
    cfg = PL.PipelineConfig(cache_dir=ws.config.cache_dir)
    first = PL.full_pipeline(cfg)
    tsv = (ws.config.cache_dir / "reports" / "pipeline.tsv").read_bytes()
    js = (ws.config.cache_dir / "reports" / "pipeline.json").read_bytes()
    assert len(first.checks) >= 40
    assert first.ok, [c.id for c in first.checks if not c.ok]
    assert first.counts().get(FAIL, 0) == 0
    second = PL.full_pipeline(cfg)
    assert second.to_tsv() == first.to_tsv()
    assert (ws.config.cache_dir / "reports" / "pipeline.tsv").read_bytes() == tsv
    assert (ws.config.cache_dir / "reports" / "pipeline.json").read_bytes() == js
