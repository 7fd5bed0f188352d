"""Tests for static and dynamic check statistics.

Covers:
- collect_stats on the loop example (static counts, dynamic ratio)
- all-raw and all-safe programs bracket the remaining percentage
- per-function kind histograms of the uninstrumented module
- emit_stats without outcomes, format_stats rendering
"""

import pytest

from safeir.constants import MODE_BASELINE, MODE_SAFEFFI, MODE_SAFEFFI_HEAP
from safeir.analysis import infer_kinds
from safeir.harness import collect_stats, emit_stats, format_stats
from safeir.parsers import parse_module
from safeir.passes import instrument

ALL_RAW = """\
module raw
fn main(%p: *{i64, i64}:raw) -> i64 {
entry:
  %a = gep %p, 0 -> *i64
  %b = gep %p, 8 -> *i64
  %x = load i64, %a
  %y = load i64, %b
  %s = add i64 %x, %y
  ret %s
}
"""

ALL_SAFE = """\
module safe
fn main(%p: &{i64, i64}:safe) -> i64 {
entry:
  %a = gep %p, 0 -> &i64
  %b = gep %p, 8 -> &i64
  %x = load i64, %a
  %y = load i64, %b
  %s = add i64 %x, %y
  ret %s
}
"""


class TestCollectStats:

    def test_loop_cast_static(self, loop_cast):
        report = collect_stats(loop_cast)
        assert report["dynamic"] == {}
        assert report["ratios"] == {}
        baseline = report["static"][MODE_BASELINE]
        safeffi = report["static"][MODE_SAFEFFI]
        assert baseline["baseline"] == 5
        assert baseline["remaining_pct"] == pytest.approx(100.0)
        assert safeffi["elided"] == 5
        assert safeffi["remaining"] == 1
        assert safeffi["remaining_pct"] == pytest.approx(20.0)
        assert safeffi["functions"]["foo"]["added"]["cast"] == 1

    def test_loop_cast_dynamic_ratio(self, loop_cast):
        report = collect_stats(loop_cast, entry="main")
        dynamic = report["dynamic"]
        assert dynamic[MODE_BASELINE]["deref"] == 2003
        assert dynamic[MODE_SAFEFFI]["checks"] <= 5
        assert dynamic[MODE_SAFEFFI]["ensures"] == 1
        assert report["ratios"][MODE_SAFEFFI] == pytest.approx(1 / 2003)
        assert report["ratios"][MODE_SAFEFFI_HEAP] == pytest.approx(1 / 2003)
        assert MODE_BASELINE not in report["ratios"]

    def test_all_raw_keeps_every_check(self):
        report = collect_stats(parse_module(ALL_RAW))
        safeffi = report["static"][MODE_SAFEFFI]
        assert safeffi["elided"] == 0
        assert safeffi["remaining_pct"] == pytest.approx(100.0)

    def test_all_safe_elides_every_check(self):
        report = collect_stats(parse_module(ALL_SAFE))
        safeffi = report["static"][MODE_SAFEFFI]
        assert safeffi["elided"] == 2
        assert safeffi["remaining"] == 0
        assert safeffi["remaining_pct"] == pytest.approx(0.0)
        assert safeffi["function_median_pct"] == pytest.approx(0.0)

    def test_selected_modes(self, loop_cast):
        report = collect_stats(loop_cast, modes=(MODE_SAFEFFI,))
        assert list(report["static"]) == [MODE_SAFEFFI]

    def test_kind_histograms(self):
        safe = collect_stats(parse_module(ALL_SAFE))["kinds"]["main"]
        assert safe["SAFE"] == 3
        assert safe["RAW"] == 0
        raw = collect_stats(parse_module(ALL_RAW))["kinds"]["main"]
        assert raw["RAW"] == 3
        assert raw["SAFE"] == 0

    def test_kind_histogram_per_defined_function(self, loop_cast):
        kinds = collect_stats(loop_cast, modes=(MODE_BASELINE,))["kinds"]
        assert sorted(kinds) == ["c_create", "do_some", "foo", "main"]
        foo = infer_kinds(loop_cast.function("foo"), loop_cast)
        assert kinds["foo"] == foo.histogram()
        assert kinds["foo"]["RAW"] >= 1


class TestEmitStats:

    def test_functions_without_accesses_have_no_percentage(self, loop_cast):
        _, stats = instrument(loop_cast, MODE_SAFEFFI)
        report = emit_stats({MODE_SAFEFFI: stats})
        functions = report["static"][MODE_SAFEFFI]["functions"]
        assert functions["main"]["remaining_pct"] is None
        assert report["static"][MODE_SAFEFFI]["function_mean_pct"] == pytest.approx(20.0)
        assert report["kinds"] == {}

    def test_format(self, loop_cast):
        text = format_stats(collect_stats(loop_cast, entry="main"))
        lines = text.splitlines()
        assert lines[0].split() == ["mode", "baseline", "elided", "added", "remaining", "pct"]
        assert any(line.startswith("safeffi ") and line.endswith("20.0%") for line in lines)
        assert "safeffi: 1 checks executed, 1 ensures" in text

    def test_format_kinds(self):
        lines = format_stats(collect_stats(parse_module(ALL_SAFE))).splitlines()
        assert lines[-1].startswith("kinds main: SAFE=3 RAW=0 ")
