import logging
import math
import os
from pathlib import Path

import numpy as np
import pytest

from glycocc.errors import BadFractions, DegenerateVariance, EmptyDataset, FormatError, TooFewModels
from glycocc.models.dataset import Dataset, GlycanRecord, Partition, PerformanceTensor
from glycocc.models.run_config import TaskKind
from glycocc.services.anp import anp, build_tensor, raw_scores
from glycocc.services.datasets import (
    assign_ood,
    dataset_stats,
    load_dataset,
    ood_flags,
    random_split,
    read_split,
    write_split,
    zscore,
)
from glycocc.services.fingerprints import mono_fingerprint, tanimoto
from glycocc.services.glycan_grammar import write_iupac
from glycocc.services.metrics import accuracy, auroc, compute_metrics, mcc, mcc_from_confusion, regression_metrics
from glycocc.services.reports import anp_rows, format_anp_table, read_metric_report, write_metric_report

MODELS = ["RF", "SVM", "XGB", "MLP", "GNNGLY", "SweetNet", "GLAMOUR", "RGCN", "GIFFLAR"]
TASKS = ["Immun", "Glycos", "D", "K", "P", "C", "O", "F", "G", "S"]
# MCC per model (rows) and benchmark task (columns)
MCC_TABLE = np.array([
    [.8223, .9648, .9129, .8749, .8010, .7094, .5546, .4944, .4613, .4439],
    [.8034, .9648, .8793, .8403, .7466, .6398, .4588, .4369, .4137, .3880],
    [.8302, .9824, .8718, .8348, .7393, .6282, .4705, .4420, .3870, .3467],
    [.8481, .8704, .9106, .8763, .8033, .7206, .5413, .5097, .4708, .4282],
    [.5328, .7611, .7717, .7747, .6609, .4685, .0156, .0150, .0151, .0154],
    [.7590, .8784, .8841, .7704, .6232, .5288, .0156, .1872, .0151, .1175],
    [.9212, .9767, .9111, .8704, .7864, .6857, .4998, .4785, .4320, .4407],
    [.6954, .0000, .8810, .8409, .7211, .4039, .2288, .0314, .2530, .0194],
    [.8930, .9883, .9298, .9011, .8278, .7714, .6118, .5795, .5391, .4898],
])
MEAN_MONOSACCHARIDES = {
    "immunogenicity": 7.47,
    "glycosylation": 9.01,
    "taxonomy": 7.13,
    "lgi": 6.54,
}


def write_tsv(path: Path, rows) -> Path:
    path.write_text("".join("\t".join(map(str, row)) + "\n" for row in rows), encoding="utf-8")
    return path


def records_from_trees(trees):
    return [
        GlycanRecord(id=f"g{i}", iupac=write_iupac(t), label=np.array(0.0), tree=t)
        for i, t in enumerate(trees)
    ]


def mcc_tensor(columns=None):
    columns = list(range(len(TASKS))) if columns is None else columns
    values = MCC_TABLE[:, columns].T[None, :, :]
    return PerformanceTensor(values=values, metrics=["mcc"], datasets=[TASKS[c] for c in columns], models=MODELS)


# ingestion

def test_load_binary_dataset_drops_bad_glycans(tmp_path, caplog):
    caplog.set_level(logging.INFO, logger="glycocc")
    path = write_tsv(tmp_path / "immuno.tsv", [
        ("id", "iupac", "immunogenic"),
        ("a", "Gal(b1-4)Glc", 1),
        ("b", "Man(a1-3)[Man(a1-6)]Man", 0),
        ("c", "Gal(b1-", 1),
        ("d", "Glc", 0),
    ])
    dataset = load_dataset(path, TaskKind.BINARY)
    assert dataset.name == "immuno"
    assert dataset.ids == ["a", "b", "d"]
    assert dataset.dropped == 1
    np.testing.assert_array_equal(dataset.labels(), [1.0, 0.0, 0.0])
    assert "Dropped 1 glycan" in caplog.text
    assert dataset_stats(dataset)["mono_per_glycan"] == pytest.approx(2.0)


def test_load_multilabel_dataset(tmp_path):
    path = write_tsv(tmp_path / "tax.tsv", [
        ("id", "iupac", "Animalia", "Plantae"),
        ("a", "Glc", 1, 0),
        ("b", "Gal(b1-4)Glc", 1, 1),
    ])
    dataset = load_dataset(path, TaskKind.MULTILABEL, name="taxonomy_kingdom")
    assert dataset.name == "taxonomy_kingdom"
    assert dataset.n_outputs == 2
    assert dataset.label_names == ["Animalia", "Plantae"]
    assert dataset.labels().shape == (2, 2)


def test_load_interaction_dataset(tmp_path):
    embeddings = write_tsv(tmp_path / "proteins.tsv", [("protein_id", "e0", "e1"), ("P1", 0.5, 1.0), ("P2", 0.0, -1.0)])
    path = write_tsv(tmp_path / "lgi.tsv", [
        ("id", "iupac", "protein_id", "binding"),
        ("a", "Glc", "P1", 2.0),
        ("b", "Gal(b1-4)Glc", "P2", 4.0),
    ])
    dataset = load_dataset(path, TaskKind.REGRESSION, protein_embeddings=embeddings, zscore_values=True)
    np.testing.assert_allclose(dataset.labels(), [-1.0, 1.0])
    np.testing.assert_allclose(dataset.protein_matrix(), [[0.5, 1.0], [0.0, -1.0]])


@pytest.mark.parametrize("rows", [
    [("id", "iupac", "y"), ("a", "Glc")],
    [("id", "iupac", "y"), ("a", "Glc", 1), ("a", "Gal", 0)],
    [("id", "iupac", "y"), ("a", "Glc", 2)],
    [("name", "iupac", "y"), ("a", "Glc", 1)],
    [("id", "iupac", "y", "z"), ("a", "Glc", 1, 0)],
])
def test_malformed_dataset_rejected(tmp_path, rows):
    with pytest.raises(FormatError):
        load_dataset(write_tsv(tmp_path / "bad.tsv", rows), TaskKind.BINARY)


def test_dataset_without_usable_records(tmp_path):
    path = write_tsv(tmp_path / "bad.tsv", [("id", "iupac", "y"), ("a", "Xyz", 1)])
    with pytest.raises(EmptyDataset):
        load_dataset(path, TaskKind.BINARY)


def test_format_error_carries_line(tmp_path):
    path = write_tsv(tmp_path / "bad.tsv", [("id", "iupac", "y"), ("a", "Glc", 1), ("b", "Glc")])
    with pytest.raises(FormatError) as info:
        load_dataset(path, TaskKind.BINARY)
    assert info.value.line == 3


# splits

def test_split_sizes():
    split = random_split([f"g{i}" for i in range(100)], (0.7, 0.2, 0.1), seed=0)
    assert split.sizes() == {"train": 70, "val": 20, "test": 10}
    split = random_split([f"g{i}" for i in range(1168)], (0.7, 0.2, 0.1), seed=3)
    assert split.sizes() == {"train": 818, "val": 234, "test": 116}


def test_split_is_seeded():
    ids = [f"g{i}" for i in range(50)]
    a = random_split(ids, (0.6, 0.2, 0.2), seed=1)
    b = random_split(ids, (0.6, 0.2, 0.2), seed=1)
    c = random_split(ids, (0.6, 0.2, 0.2), seed=2)
    assert a.partition == b.partition
    assert a.partition != c.partition
    assert list(a.partition) == ids


@pytest.mark.parametrize("fractions", [(0.5, 0.5, 0.1), (0.8, 0.2, 0.0), (0.5, 0.5)])
def test_bad_fractions(fractions):
    with pytest.raises(BadFractions):
        random_split(["a", "b", "c"], fractions)


def test_split_file_round_trip(tmp_path):
    split = random_split([f"g{i}" for i in range(20)], (0.7, 0.2, 0.1), seed=5)
    write_split(split, tmp_path / "split.tsv")
    assert read_split(tmp_path / "split.tsv").partition == split.partition


def test_zscore():
    np.testing.assert_allclose(zscore([1.0, 3.0]), [-1.0, 1.0])
    with pytest.raises(DegenerateVariance):
        zscore([2.0, 2.0, 2.0])
    with pytest.raises(DegenerateVariance):
        zscore([1.0])


# similarity and OOD

def test_tanimoto_counts_and_sets():
    assert tanimoto({"a": 2, "b": 1}, {"a": 1}) == pytest.approx(1.0 / 3.0)
    assert tanimoto({"x"}, {"x", "y"}) == pytest.approx(0.5)
    assert tanimoto({}, {}) == 0.0
    assert tanimoto({"a": 1}, {"b": 1}) == 0.0


def test_mono_fingerprint(lactose_tree):
    assert mono_fingerprint(lactose_tree) == {"Gal": 1, "Glc": 1, "Gal(b1-4)Glc": 1}


@pytest.mark.parametrize("threshold", [0.75, 1.0])
def test_ood_flags_match_brute_force(random_trees, threshold):
    records = records_from_trees(random_trees(200, max_nodes=6, seed=21))
    train = Dataset(name="t", task=TaskKind.BINARY, records=records[:150])
    test = Dataset(name="t", task=TaskKind.BINARY, records=records[150:])
    flags = ood_flags(train, test, threshold)
    reference = [mono_fingerprint(r.tree) for r in train.records]
    for record in test.records:
        best = max(tanimoto(mono_fingerprint(record.tree), fp) for fp in reference)
        assert flags[record.id] == (best < threshold)


def test_training_glycan_is_in_distribution(random_trees):
    records = records_from_trees(random_trees(30, seed=4))
    dataset = Dataset(name="t", task=TaskKind.BINARY, records=records)
    split = random_split(dataset, (0.5, 0.25, 0.25), seed=0)
    split = assign_ood(dataset, split, threshold=1.0)
    assert set(split.ood) == set(split.ids(Partition.TEST))
    train = dataset.subset(split.ids(Partition.TRAIN))
    copy = Dataset(name="t", task=TaskKind.BINARY, records=[records_from_trees([train.records[0].tree])[0]])
    assert ood_flags(train, copy, 1.0) == {"g0": False}


# metrics

def test_mcc_worked_example():
    logits = np.array([2.0, 1.0, -1.0, -3.0])
    labels = np.array([1.0, 0.0, 0.0, 0.0])
    assert mcc(logits, labels, TaskKind.BINARY) == pytest.approx(2.0 / math.sqrt(12.0))
    assert mcc_from_confusion(1, 2, 1, 0) == pytest.approx(2.0 / math.sqrt(12.0))
    assert accuracy(logits, labels, TaskKind.BINARY) == pytest.approx(0.75)


def test_mcc_degenerate_is_zero():
    assert mcc(np.ones(4), np.ones(4), TaskKind.BINARY) == 0.0


def test_multilabel_mcc_is_column_mean():
    rng = np.random.default_rng(8)
    logits = rng.normal(size=(40, 3))
    labels = (rng.random((40, 3)) > 0.5).astype(float)
    expected = []
    for j in range(3):
        p, t = logits[:, j] > 0, labels[:, j] == 1
        expected.append(mcc_from_confusion(np.sum(p & t), np.sum(~p & ~t), np.sum(p & ~t), np.sum(~p & t)))
    assert mcc(logits, labels, TaskKind.MULTILABEL) == pytest.approx(np.mean(expected))


def test_multiclass_metrics():
    logits = np.eye(3)[[0, 1, 2, 1]] * 5.0
    labels = np.array([0, 1, 2, 1])
    scores = compute_metrics(logits, labels, TaskKind.MULTICLASS)
    assert scores == pytest.approx({"accuracy": 1.0, "auroc": 1.0, "mcc": 1.0})


def test_auroc_ranks_and_ties():
    labels = np.array([0, 0, 1, 1])
    assert auroc(np.array([0.1, 0.2, 0.8, 0.9]), labels, TaskKind.BINARY) == pytest.approx(1.0)
    assert auroc(np.array([0.9, 0.8, 0.2, 0.1]), labels, TaskKind.BINARY) == pytest.approx(0.0)
    assert auroc(np.zeros(4), labels, TaskKind.BINARY) == pytest.approx(0.5)


def test_auroc_skips_single_class_labels():
    logits = np.array([[0.1, 1.0], [0.9, 2.0]])
    labels = np.array([[0, 1], [1, 1]])
    assert auroc(logits, labels, TaskKind.MULTILABEL) == pytest.approx(1.0)


def test_regression_metrics():
    scores = regression_metrics(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 4.0]))
    assert scores["mae"] == pytest.approx(1.0 / 3.0)
    assert scores["mse"] == pytest.approx(1.0 / 3.0)
    assert scores["pearson"] == pytest.approx(np.corrcoef([1, 2, 3], [1, 2, 4])[0, 1])


# accumulated normalized performance

def test_anp_single_task():
    scores = dict(zip(MODELS, anp(mcc_tensor([0]))))
    assert scores["GLAMOUR"] == pytest.approx(1.0)
    assert scores["GNNGLY"] == pytest.approx(0.0)
    assert scores["GIFFLAR"] == pytest.approx(0.9274, abs=1e-4)


def test_anp_full_table_matches_column_normalization():
    P = mcc_tensor()
    low, high = MCC_TABLE.min(axis=0), MCC_TABLE.max(axis=0)
    expected = ((MCC_TABLE - low) / (high - low)).sum(axis=1)
    np.testing.assert_allclose(anp(P), expected)
    best = [MODELS[i] for i in MCC_TABLE.argmax(axis=0)]
    assert best == ["GLAMOUR"] + ["GIFFLAR"] * 9
    rows = anp_rows(P)
    assert rows[0]["model"] == "GIFFLAR"
    assert rows[0]["anp"] == pytest.approx(9.0 + (0.8930 - 0.5328) / (0.9212 - 0.5328))


def test_anp_constant_slice_and_error_metrics():
    values = np.array([[[0.5, 0.5]], [[0.1, 0.3]]])
    P = PerformanceTensor(values=values, metrics=["accuracy", "mae"], datasets=["d"], models=["a", "b"])
    assert anp(P) == [1.0, 0.0]


def test_anp_needs_two_models():
    with pytest.raises(TooFewModels):
        anp(PerformanceTensor(values=np.ones((1, 1, 1)), metrics=["mcc"], datasets=["d"], models=["m"]))


def test_raw_scores_map_mcc():
    P = PerformanceTensor(values=np.array([[[-1.0, 1.0]]]), metrics=["mcc"], datasets=["d"], models=["a", "b"])
    assert raw_scores(P) == [0.0, 1.0]


def test_build_tensor_from_reports(tmp_path):
    records = [
        {"model": m, "dataset": d, "subset": "test", "rows": "full", "metric": metric, "value": v}
        for m, base in (("GIFFLAR", 0.9), ("FP-MLP", 0.8), ("RF", 0.7))
        for d in ("immunogenicity",)
        for metric, v in (("accuracy", base), ("mcc", base - 0.1))
    ]
    path = write_metric_report(records, tmp_path / "metrics.tsv")
    loaded = read_metric_report(path)
    assert [r["model"] for r in loaded] == [r["model"] for r in records]
    assert [r["value"] for r in loaded] == pytest.approx([r["value"] for r in records])
    P = build_tensor(loaded, metrics=["accuracy", "mcc"])
    assert P.values.shape == (2, 1, 3)
    assert P.models == ["FP-MLP", "GIFFLAR", "RF"]
    table = format_anp_table(P)
    assert table.splitlines()[1].startswith("GIFFLAR")
    assert "(2 metrics x 1 datasets)" in table
    with pytest.raises(FormatError):
        build_tensor(loaded[:-1], metrics=["accuracy", "mcc"])


def test_report_header_checked(tmp_path):
    path = write_tsv(tmp_path / "r.tsv", [("model", "value"), ("a", 1)])
    with pytest.raises(FormatError):
        read_metric_report(path)


# corpus statistics; needs the benchmark files on disk

@pytest.mark.skipif(not os.environ.get("GLYCOCC_BENCHMARK_DIR"), reason="GLYCOCC_BENCHMARK_DIR not set")
@pytest.mark.parametrize("name,task", [
    ("immunogenicity", TaskKind.BINARY),
    ("glycosylation", TaskKind.MULTICLASS),
    ("taxonomy", TaskKind.MULTILABEL),
    ("lgi", TaskKind.REGRESSION),
])
def test_benchmark_corpus_statistics(name, task):
    root = Path(os.environ["GLYCOCC_BENCHMARK_DIR"])
    options = {"n_classes": 3} if task is TaskKind.MULTICLASS else {}
    if task is TaskKind.REGRESSION:
        options["protein_embeddings"] = root / "lgi_proteins.tsv"
    stats = dataset_stats(load_dataset(root / f"{name}.tsv", task, **options))
    assert stats["mono_per_glycan"] == pytest.approx(MEAN_MONOSACCHARIDES[name], rel=0.05)
