import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alsc import cloud as cl
from alsc.classes import DEFAULT_CLASSES, level2_name
from alsc.tableio import FormatError, Table, read_table, write_table


def _write(tmp_path, text, name="pts.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_xyz_only_file_gives_bbox(tmp_path):
    p = _write(tmp_path, "x,y,z\n0,1,2\n3,-1,5\n1,4,0\n")
    c = cl.ingest(p)
    assert len(c) == 3 and c.schema == ("x", "y", "z")
    np.testing.assert_array_equal(c.bbox[0], [0, -1, 0])
    np.testing.assert_array_equal(c.bbox[1], [3, 4, 5])


def test_echo_id_above_count_is_flagged(tmp_path, caplog):
    p = _write(tmp_path, "x,y,z,echo_id,echo_count\n0,0,0,3,2\n1,1,1,1,2\n")
    c = cl.ingest(p)
    assert len(c) == 2
    assert not c.valid("echo_id")[0] and not c.valid("echo_count")[0]
    assert c.valid("echo_id")[1]
    assert c.report.invalid_counts["echo_id"] == 1
    assert c.report.warnings


def test_error_class_is_accepted(tmp_path):
    c = cl.ingest(_write(tmp_path, "x,y,z,class_code\n0,0,0,99\n"))
    assert c.labels.tolist() == [99]
    assert DEFAULT_CLASSES.name(99) == "error"


def test_level1_rollup_of_vegetation():
    c = cl.from_arrays(x=np.zeros(3), y=np.zeros(3), z=np.zeros(3),
                       class_code=np.array([5, 6, 7]))
    assert cl.class_breakdown(c, level=1) == [(5, 3, 1.0)]


def test_breakdown_fractions():
    codes = np.array([2] * 10 + [9] * 30)
    c = cl.from_arrays(x=np.zeros(40), y=np.zeros(40), z=np.zeros(40), class_code=codes)
    assert cl.class_breakdown(c) == [(2, 10, 0.25), (9, 30, 0.75)]


def test_breakdown_needs_labels():
    c = cl.from_arrays(x=np.zeros(2), y=np.zeros(2), z=np.zeros(2))
    with pytest.raises(ValueError):
        cl.class_breakdown(c)


def test_level2_aliases():
    assert level2_name(DEFAULT_CLASSES, 5) == "deciduous forest"
    assert level2_name(DEFAULT_CLASSES, 8) == "building roof"
    assert level2_name(DEFAULT_CLASSES, 6) == "coniferous forest"


def test_unknown_class_code_is_rejected():
    with pytest.raises(FormatError, match="77"):
        cl.from_arrays(x=np.zeros(2), y=np.zeros(2), z=np.zeros(2),
                       class_code=np.array([2, 77]))


def test_upward_beam_is_flagged():
    c = cl.from_arrays(x=np.zeros(2), y=np.zeros(2), z=np.zeros(2),
                       vx=np.zeros(2), vy=np.zeros(2), vz=np.array([-1.0, 0.5]))
    assert c.valid("vz").tolist() == [True, False]


def test_malformed_row_reports_line(tmp_path):
    p = _write(tmp_path, "x,y,z\n0,0,0\n1,2\n")
    with pytest.raises(FormatError) as e:
        cl.ingest(p)
    assert e.value.line == 3


def test_missing_declared_column(tmp_path):
    p = _write(tmp_path, "x,y,z\n0,0,0\n")
    with pytest.raises(FormatError):
        cl.ingest(p, schema=["x", "y", "z", "amplitude"])


def test_subset_and_record():
    c = cl.from_arrays(x=np.arange(4.0), y=np.zeros(4), z=np.zeros(4),
                       amplitude=np.array([1.0, np.nan, 3.0, 4.0]))
    s = c.subset([1, 3])
    assert len(s) == 2
    assert s.record(0).amplitude is None and s.record(1).amplitude == 4.0


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(finite, finite, finite, st.integers(1, 5), st.integers(0, 4),
                          st.sampled_from([2, 5, 8, 9, 13, 99])), min_size=1, max_size=30),
       st.booleans())
def test_roundtrip_is_bit_exact(tmp_path_factory, rows, binary):
    a = np.array(rows, dtype=float)
    cols = dict(x=a[:, 0], y=a[:, 1], z=a[:, 2], echo_count=a[:, 3],
                echo_id=np.minimum(a[:, 4] + 1, a[:, 3]), class_code=a[:, 5])
    c = cl.from_arrays(**cols)
    p = tmp_path_factory.mktemp("rt") / ("c.alsc" if binary else "c.txt")
    cl.write_cloud(p, c)
    back = cl.ingest(p)
    for k in cols:
        assert back.column(k).tobytes() == c.column(k).tobytes()
        assert np.array_equal(back.valid(k), c.valid(k))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from(DEFAULT_CLASSES.codes), min_size=1, max_size=200))
def test_rollup_counts_sum(codes):
    n = len(codes)
    c = cl.from_arrays(x=np.zeros(n), y=np.zeros(n), z=np.zeros(n),
                       class_code=np.array(codes, dtype=float))
    fine = cl.class_breakdown(c, 2)
    coarse = dict((k, v) for k, v, _ in cl.class_breakdown(c, 1))
    sums: dict[int, int] = {}
    for code, count, _ in fine:
        p = DEFAULT_CLASSES.parent(code)
        sums[p] = sums.get(p, 0) + count
    assert sums == coarse


def test_table_text_keeps_nan_and_comments(tmp_path):
    t = Table(["a", "b"], {"a": np.array([1.0, np.nan]), "b": np.array([0.1, 2.0])},
              ["hello world"])
    write_table(tmp_path / "t.txt", t)
    back = read_table(tmp_path / "t.txt")
    assert back.comments == ["hello world"]
    assert np.isnan(back.data["a"][1]) and back.data["b"][0] == 0.1
