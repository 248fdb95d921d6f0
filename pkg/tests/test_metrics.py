import pytest

from risran.core import Slice
from risran.metrics import (KpmRecord, SummaryRow, aggregate, export_csv, export_kpm_csv,
                            format_number, prb_ratio)


def record(ts=100, ue=1, sl=Slice.EMBB, thr=1000, buf=0, cqi=5, mcs=9, granted=3, requested=4):
    return KpmRecord(timestamp_ms=ts, ue_id=ue, slice=sl, throughput_bps=thr,
                     buffer_bytes=buf, cqi=cqi, mcs=mcs, granted_prbs=granted,
                     requested_prbs=requested)


class TestPrbRatio:
    def test_examples(self):
        assert prb_ratio(50, 50) == 1.0
        assert prb_ratio(25, 50) == 0.5
        assert prb_ratio(0, 0) == 1.0  # idle slice counts as satisfied

    def test_bounds(self):
        for granted, requested in ((0, 7), (3, 9), (11, 11)):
            assert 0.0 <= prb_ratio(granted, requested) <= 1.0
        assert prb_ratio(9, 9) == 1.0

    def test_contract_violations(self):
        with pytest.raises(ValueError):
            prb_ratio(5, 4)
        with pytest.raises(ValueError):
            prb_ratio(-1, 4)


class TestAggregate:
    def test_single_record_statistics_collapse(self):
        rows = aggregate([record(thr=5000)])
        by_metric = {r.metric: r for r in rows}
        thr = by_metric["throughput_bps"]
        assert thr.median == thr.p25 == thr.p75 == thr.mean == 5000

    def test_even_count_uses_lower_median(self):
        records = [record(ts=t, thr=v) for t, v in zip((1, 2, 3, 4), (1, 2, 3, 4))]
        rows = {r.metric: r for r in aggregate(records)}
        assert rows["throughput_bps"].median == 2

    def test_permutation_invariance(self):
        records = [record(ts=t, thr=v, cqi=c)
                   for t, v, c in ((1, 10, 3), (2, 50, 7), (3, 30, 5), (4, 20, 1))]
        assert aggregate(records) == aggregate(list(reversed(records)))

    def test_groups_without_records_omitted(self):
        rows = aggregate([record(sl=Slice.EMBB)], group_by="slice")
        assert {r.group for r in rows} == {"eMBB"}

    def test_group_by_ue(self):
        rows = aggregate([record(ue=1), record(ue=2)], group_by="ue")
        assert {r.group for r in rows} == {"1", "2"}

    def test_unknown_grouping_rejected(self):
        with pytest.raises(ValueError):
            aggregate([record()], group_by="config")


class TestExportCsv:
    def test_header_only_for_empty_rows(self, tmp_path):
        path = tmp_path / "empty.csv"
        export_csv([], ("a", "b"), path)
        assert path.read_text() == "a,b\r\n"

    def test_deterministic_bytes(self, tmp_path):
        rows = [{"a": 1, "b": 0.123456789}, {"a": 2, "b": 1 / 3}]
        p1, p2 = tmp_path / "one.csv", tmp_path / "two.csv"
        export_csv(rows, ("a", "b"), p1)
        export_csv(rows, ("a", "b"), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_six_significant_digits_round_trip(self, tmp_path):
        path = tmp_path / "sig.csv"
        value = 0.12345678901
        export_csv([{"x": value}], ("x",), path)
        cell = path.read_text().splitlines()[1]
        assert abs(float(cell) - value) <= 1e-6 * abs(value)

    def test_kpm_schema(self, tmp_path):
        path = tmp_path / "kpm.csv"
        export_kpm_csv([record()], path)
        header = path.read_text().splitlines()[0]
        assert header == ("timestamp_ms,ue_id,slice,throughput_bps,buffer_bytes,"
                          "cqi,mcs,granted_prbs,requested_prbs")

    def test_unwritable_path_reports_context(self, tmp_path):
        with pytest.raises(OSError, match="no/such"):
            export_csv([], ("a",), tmp_path / "no" / "such" / "file.csv")


class TestFormatNumber:
    def test_integers_verbatim(self):
        assert format_number(1234567) == "1234567"

    def test_floats_six_significant(self):
        assert format_number(1 / 3) == "0.333333"
        assert format_number(1234567.0) == "1.23457e+06"


class TestKpmValidation:
    def test_validate_flags_bad_fields(self):
        with pytest.raises(ValueError):
            record(cqi=16).validate()
        with pytest.raises(ValueError):
            record(mcs=29).validate()
        with pytest.raises(ValueError):
            record(thr=-1).validate()
        assert record().validate() is not None
