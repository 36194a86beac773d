# tests/test_corpus.py

import numpy as np
import pytest

from dirichlet_wrapper.corpus import (
    EmbeddingTable,
    Example,
    ShiftScenario,
    featurize_avg_embedding,
    featurize_examples,
    featurize_hashed_bow,
    generate_shift_scenario,
    load_dataset,
    load_embedding_table,
    save_dataset,
    split_dataset,
    tokenize,
)
from dirichlet_wrapper.errors import ConfigError, ParseError
from dirichlet_wrapper.utils import fnv1a_64


def _table(**vectors):
    return EmbeddingTable(vectors={k: np.asarray(v, dtype=float) for k, v in vectors.items()}, dim=2)


# 1. Featurization


def test_tokenize_lowercases_and_splits():
    assert tokenize("Great food!! 10/10, would_eat again") == ["great", "food", "10", "10", "would", "eat", "again"]
    assert tokenize("") == []


def test_hashed_bow_empty_text():
    np.testing.assert_array_equal(featurize_hashed_bow("", 8), np.zeros(8))


def test_hashed_bow_single_token():
    vector = featurize_hashed_bow("tasty", 16)
    assert np.linalg.norm(vector) == pytest.approx(1.0)
    assert vector[fnv1a_64("tasty") % 16] == pytest.approx(1.0)


def test_hashed_bow_counts_repeated_tokens():
    vector = featurize_hashed_bow("good good bad", 8)
    good, bad = fnv1a_64("good") % 8, fnv1a_64("bad") % 8
    expected = np.zeros(8)
    expected[good] += 2.0
    expected[bad] += 1.0
    np.testing.assert_allclose(vector, expected / np.linalg.norm(expected))
    if good != bad:
        assert vector[good] == pytest.approx(2 * vector[bad])


def test_hashed_bow_ignores_token_order():
    np.testing.assert_array_equal(
        featurize_hashed_bow("the service was slow", 32), featurize_hashed_bow("slow was the SERVICE", 32)
    )


def test_hashed_bow_rejects_zero_dim():
    with pytest.raises(ConfigError):
        featurize_hashed_bow("text", 0)


def test_avg_embedding_examples():
    table = _table(up=[1.0, 0.0], right=[0.0, 1.0], down=[-1.0, 0.0])
    np.testing.assert_array_equal(featurize_avg_embedding("up", table), [1.0, 0.0])
    np.testing.assert_array_equal(featurize_avg_embedding("up down", table), [0.0, 0.0])
    np.testing.assert_allclose(featurize_avg_embedding("Up, right!", table), [0.5, 0.5])
    np.testing.assert_array_equal(featurize_avg_embedding("unknown words", table), [0.0, 0.0])


def test_avg_embedding_empty_table():
    with pytest.raises(ConfigError):
        featurize_avg_embedding("up", EmbeddingTable(vectors={}, dim=2))


def test_load_embedding_table(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("good 0.5 1.0\nbad -0.5 -1.0\n\n", encoding="utf-8")
    table = load_embedding_table(path)
    assert table.dim == 2 and len(table) == 2
    np.testing.assert_array_equal(table.vectors["bad"], [-0.5, -1.0])


def test_load_embedding_table_dimension_mismatch(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("good 0.5 1.0\nbad -0.5\n", encoding="utf-8")
    with pytest.raises(ParseError) as excinfo:
        load_embedding_table(path)
    assert excinfo.value.line_number == 2


def test_load_embedding_table_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="Failed to read embeddings"):
        load_embedding_table(tmp_path / "missing.txt")


def test_load_embedding_table_not_utf8(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_bytes(b"caf\xe9 0.5 1.0\n")
    with pytest.raises(ConfigError, match="Failed to read embeddings"):
        load_embedding_table(path)


def test_featurize_examples_prefers_precomputed_features():
    examples = [Example("a", 0, text="x", features=(1.0, 2.0)), Example("b", 1, features=(3.0, 4.0))]
    np.testing.assert_array_equal(featurize_examples(examples), [[1.0, 2.0], [3.0, 4.0]])


def test_featurize_examples_text_paths():
    examples = [Example("a", 0, text="up"), Example("b", 1, text="right up")]
    bow = featurize_examples(examples, bow_dim=16)
    assert bow.shape == (2, 16)
    embedded = featurize_examples(examples, table=_table(up=[1.0, 0.0], right=[0.0, 1.0]))
    np.testing.assert_allclose(embedded, [[1.0, 0.0], [0.5, 0.5]])


def test_featurize_examples_mixed_inputs():
    examples = [Example("a", 0, features=(1.0,)), Example("b", 1, text="only text")]
    with pytest.raises(ConfigError):
        featurize_examples(examples)
    assert featurize_examples([], bow_dim=4).shape == (0, 4)


def test_example_requires_text_or_features():
    with pytest.raises(ConfigError):
        Example("a", 0)
    with pytest.raises(ConfigError):
        Example("a", -1, text="x")


# 2. Splits and synthetic scenarios


def test_split_dataset_sizes_and_order():
    examples = [Example(f"e{i:03d}", i % 2, features=(float(i),)) for i in range(50)]
    splits = split_dataset(examples, seed=3)
    assert [len(part) for _, part in splits.items()] == [35, 5, 10]
    ids = [e.example_id for _, part in splits.items() for e in part]
    assert len(set(ids)) == 50
    for _, part in splits.items():
        assert [e.example_id for e in part] == sorted(e.example_id for e in part)
    assert split_dataset(examples, seed=3) == splits


def test_generate_shift_scenario_deterministic():
    scenario = ShiftScenario(n_source=100, n_target=50, dim=4, seed=11)
    first = generate_shift_scenario(scenario)
    second = generate_shift_scenario(scenario)
    assert first == second
    other = generate_shift_scenario(ShiftScenario(n_source=100, n_target=50, dim=4, seed=12))
    assert other[0].train != first[0].train


def test_generate_shift_scenario_splits():
    source, target = generate_shift_scenario(ShiftScenario(n_source=2000, n_target=1000, dim=3))
    assert [len(p) for _, p in source.items()] == [1400, 200, 400]
    assert [len(p) for _, p in target.items()] == [700, 100, 200]
    source_ids = {e.example_id for e in source.all()}
    target_ids = {e.example_id for e in target.all()}
    assert len(source_ids) == 2000 and len(target_ids) == 1000
    assert not source_ids & target_ids
    assert all(len(e.features) == 3 and e.label in (0, 1) for e in source.all())


def test_unshifted_target_matches_source_distribution():
    scenario = ShiftScenario(
        n_source=4000, n_target=4000, dim=2, shift_rotation_degrees=0.0, shift_translation=0.0, noise_flip_rate=0.0
    )
    source, target = generate_shift_scenario(scenario)
    for dataset in (source, target):
        points = np.array([e.features for e in dataset.all()])
        labels = np.array([e.label for e in dataset.all()])
        assert points[labels == 1, 0].mean() == pytest.approx(2.0, abs=0.1)
        assert points[labels == 0, 0].mean() == pytest.approx(-2.0, abs=0.1)
        assert points[:, 1].mean() == pytest.approx(0.0, abs=0.1)


def test_translation_moves_second_axis():
    scenario = ShiftScenario(n_source=10, n_target=4000, dim=2, shift_rotation_degrees=0.0, shift_translation=1.5)
    _, target = generate_shift_scenario(scenario)
    points = np.array([e.features for e in target.all()])
    assert points[:, 1].mean() == pytest.approx(1.5, abs=0.1)


def test_half_flip_rate_decouples_labels():
    scenario = ShiftScenario(n_source=10, n_target=4000, dim=2, shift_rotation_degrees=0.0, noise_flip_rate=0.5)
    _, target = generate_shift_scenario(scenario)
    points = np.array([e.features for e in target.all()])
    labels = np.array([e.label for e in target.all()])
    sign_rule = np.mean((points[:, 0] > 0).astype(int) == labels)
    assert sign_rule == pytest.approx(0.5, abs=0.05)


def test_shift_scenario_validation():
    with pytest.raises(ConfigError):
        ShiftScenario(noise_flip_rate=0.7)
    with pytest.raises(ConfigError):
        ShiftScenario(n_source=-1)
    with pytest.raises(ConfigError):
        generate_shift_scenario(ShiftScenario(dim=1, shift_rotation_degrees=10.0))


# 3. Dataset files


def test_save_and_load_dataset(tmp_path):
    examples = [
        Example("b", 1, text="Fine place."),
        Example("a", 0, features=(0.25, -1.0)),
        Example("c", 1, text="ok", features=(1.0, 2.0)),
    ]
    path = save_dataset(examples, tmp_path / "data" / "set.jsonl")
    assert load_dataset(path) == examples
    assert '"features"' not in path.read_text(encoding="utf-8").splitlines()[0]


def test_load_dataset_missing_label(tmp_path):
    path = tmp_path / "set.jsonl"
    path.write_text('{"example_id": "a", "text": "x", "label": 0}\n\n{"example_id": "b", "text": "y"}\n', encoding="utf-8")
    with pytest.raises(ParseError) as excinfo:
        load_dataset(path)
    assert excinfo.value.line_number == 3
    assert "label" in str(excinfo.value)


def test_load_dataset_mixed_feature_lengths(tmp_path):
    path = tmp_path / "set.jsonl"
    path.write_text(
        '{"example_id": "a", "features": [1, 2], "label": 0}\n{"example_id": "b", "features": [1, 2, 3], "label": 1}\n',
        encoding="utf-8",
    )
    with pytest.raises(ParseError) as excinfo:
        load_dataset(path)
    message = str(excinfo.value)
    assert "length 3" in message and "have 2" in message


@pytest.mark.parametrize(
    "line",
    ["[1, 2]", '{"example_id": "a", "label": "pos", "text": "x"}', '{"example_id": "a", "label": 0}', "{oops"],
)
def test_load_dataset_rejects_malformed_lines(tmp_path, line):
    path = tmp_path / "set.jsonl"
    path.write_text(line + "\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_dataset(path)


def test_load_dataset_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_dataset(tmp_path / "absent.jsonl")
