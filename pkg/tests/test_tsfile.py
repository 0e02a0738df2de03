import numpy as np
import pytest

from conftest import random_dataset
from tsaugbench.core import LabeledDataset, Series
from tsaugbench.tsfile import (
    AllMissingChannelError,
    ImputePolicy,
    InconsistentHeaderError,
    MissingDataSectionError,
    NonNumericValueError,
    RaggedRecordError,
    TsHeader,
    TsParseError,
    UnknownTagWarning,
    header_for,
    impute,
    parse_ts,
    write_ts,
)

SMALL = """@problemName demo
@dimensions 2
@equalLength true
@seriesLength 2
@classLabel true A B
@data
1.0,2.0:3.0,4.0:A
"""


def test_parse_basic_record():
    header, ds = parse_ts(SMALL)
    assert header.problem_name == "demo"
    assert ds.labels == ("A", "B")
    s, y = ds.items[0]
    assert y == 0
    assert s.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_parse_missing_marker():
    _, ds = parse_ts("@problemName m\n@classLabel true B\n@data\n1.0,?,3.0:B\n")
    s, _ = ds.items[0]
    assert s.observed.tolist() == [[True, False, True]]
    assert np.isnan(s.values[0, 1])


def test_parse_infers_dimensions_and_crlf():
    text = "@problemName x\r\n@classLabel true A\r\n@data\r\n1.0:2.0:A\r\n1.5:2.5:A\r\n"
    header, ds = parse_ts(text)
    assert header.dimensions == 2
    assert len(ds) == 2


def test_parse_comments_and_blanks():
    text = "% a comment\n@problemName x\n\n@classLabel true A\n@data\n% another\n1.0,2.0:A\n"
    _, ds = parse_ts(text)
    assert len(ds) == 1


def test_parse_unknown_tag_warns_but_survives():
    with pytest.warns(UnknownTagWarning):
        header, _ = parse_ts("@problemName x\n@flavour spicy\n@classLabel true A\n@data\n1.0:A\n")
    assert header.extra_tags == {"flavour": "spicy"}


def test_parse_ragged_channels_fatal():
    text = "@problemName x\n@dimensions 2\n@classLabel true A\n@data\n1.0:2.0:A\n1.0:2.0:3.0:A\n"
    with pytest.raises(RaggedRecordError) as err:
        parse_ts(text)
    assert err.value.line == 6


def test_parse_ragged_lengths_within_record_fatal():
    with pytest.raises(RaggedRecordError):
        parse_ts("@problemName x\n@classLabel true A\n@data\n1.0,2.0:3.0:A\n")


def test_parse_non_numeric_reports_position():
    with pytest.raises(NonNumericValueError) as err:
        parse_ts("@problemName x\n@classLabel true A\n@data\n1.0,oops,3.0:A\n")
    assert err.value.line == 4
    assert err.value.col == 5


def test_parse_requires_data_section():
    with pytest.raises(MissingDataSectionError):
        parse_ts("@problemName x\n@classLabel true A\n")


def test_parse_undeclared_label_fatal():
    with pytest.raises(TsParseError):
        parse_ts("@problemName x\n@classLabel true A\n@data\n1.0:B\n")


def test_parse_rejects_timestamps():
    with pytest.raises(TsParseError):
        parse_ts("@problemName x\n@timestamps true\n@classLabel true A\n@data\n(1,2.0):A\n")


def test_write_empty_dataset():
    ds = LabeledDataset((), ("A",))
    text = write_ts(TsHeader(problem_name="e", has_class_labels=True, class_label_names=("A",)), ds)
    lines = text.splitlines()
    assert lines[-1] == "@data"


def test_round_trip_single_series_bit_equal():
    values = np.array([[0.1, 1 / 3, -2.5e-17], [1e300, -7.0, 3.141592653589793]])
    ds = LabeledDataset(((Series(values, id="x"), 1),), ("A", "B"), name="rt")
    text = write_ts(header_for(ds), ds)
    _, back = parse_ts(text)
    assert np.array_equal(back.items[0][0].values, values)
    assert back.items[0][1] == 1


def test_round_trip_missing_reemitted():
    s = Series([[1.0, np.nan]], observed=[[True, False]], id="m")
    ds = LabeledDataset(((s, 0),), ("A",), name="m")
    text = write_ts(header_for(ds), ds)
    assert "?" in text.splitlines()[-1]
    _, back = parse_ts(text)
    assert back.value_equal(ds)


@pytest.mark.parametrize("seed", range(8))
def test_round_trip_generated(seed, gen):
    ds = random_dataset(
        np.random.default_rng(seed),
        n=6,
        m=int(gen.integers(1, 4)),
        t=8,
        n_classes=3,
        missing=0.2 if seed % 2 else 0.0,
        variable=bool(seed % 3 == 0),
        name=f"g{seed}",
    )
    text = write_ts(header_for(ds), ds)
    header, back = parse_ts(text)
    assert back.value_equal(ds)
    assert header.problem_name == ds.name


def test_write_inconsistent_header():
    ds = LabeledDataset(((Series([[1.0, 2.0]], id="a"), 0),), ("A",))
    with pytest.raises(InconsistentHeaderError):
        write_ts(TsHeader(dimensions=3, has_class_labels=True, class_label_names=("A",)), ds)
    with pytest.raises(InconsistentHeaderError):
        write_ts(
            TsHeader(series_length=5, has_class_labels=True, class_label_names=("A",)), ds
        )


def test_impute_noop_on_fully_observed():
    ds = random_dataset(np.random.default_rng(0), 4, 2, 6)
    out = impute(ds)
    assert out.value_equal(ds)


def test_impute_linear_midpoint():
    s = Series([[1.0, np.nan, 3.0]], observed=[[True, False, True]])
    out = impute(LabeledDataset(((s, 0),), ("A",)))
    assert out.items[0][0].values.tolist() == [[1.0, 2.0, 3.0]]


def test_impute_forward_fill_backfills_head():
    s = Series([[np.nan, 4.0]], observed=[[False, True]])
    out = impute(LabeledDataset(((s, 0),), ("A",)), ImputePolicy(method="ffill"))
    assert out.items[0][0].values.tolist() == [[4.0, 4.0]]


def test_impute_zero_fill():
    s = Series([[np.nan, 4.0]], observed=[[False, True]])
    out = impute(LabeledDataset(((s, 0),), ("A",)), ImputePolicy(method="zero"))
    assert out.items[0][0].values.tolist() == [[0.0, 4.0]]


def test_impute_all_missing_channel_fatal():
    s = Series([[np.nan, np.nan], [1.0, 2.0]], observed=[[False, False], [True, True]])
    with pytest.raises(AllMissingChannelError):
        impute(LabeledDataset(((s, 0),), ("A",)))


def test_impute_pads_variable_lengths_with_edge():
    short = Series([[1.0, 5.0]], id="s")
    long = Series([[1.0, 2.0, 3.0, 4.0]], id="l")
    ds = LabeledDataset(((short, 0), (long, 0)), ("A",))
    out = impute(ds)
    assert out.items[0][0].values.tolist() == [[1.0, 5.0, 5.0, 5.0]]
    assert out.equal_length and out.common_length == 4


def test_impute_fixed_pad_and_truncate_flag():
    ds = LabeledDataset(((Series([[1.0, 2.0, 3.0]], id="a"), 0),), ("A",))
    with pytest.raises(ValueError):
        impute(ds, ImputePolicy(pad_to=2))
    out = impute(ds, ImputePolicy(pad_to=2, truncate=True))
    assert out.common_length == 2
    padded = impute(ds, ImputePolicy(pad_to=5, pad_fill="zero"))
    assert padded.items[0][0].values.tolist() == [[1.0, 2.0, 3.0, 0.0, 0.0]]


def test_impute_never_touches_observed_values(gen):
    ds = random_dataset(gen, 5, 2, 9, missing=0.3, variable=True)
    out = impute(ds)
    for (orig, _), (filled, _) in zip(ds.items, out.items):
        t = orig.n_steps
        assert np.array_equal(
            filled.values[:, :t][orig.observed], orig.values[orig.observed]
        )
