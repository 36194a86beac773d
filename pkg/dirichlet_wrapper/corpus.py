# corpus.py

"""
Corpus Handling

Dataset schema and JSONL ingestion, text featurization (hashed bag-of-words and
embedding averaging), deterministic splits, and the synthetic domain-shift
scenario used to reproduce the train-on-source / predict-on-target protocol at
desk scale.

Functions:
    - tokenize: Lowercases text and splits it on non-alphanumeric runs.
    - featurize_hashed_bow: L2-normalized hashed bag-of-words vector.
    - featurize_avg_embedding: Mean embedding of the in-vocabulary tokens.
    - load_embedding_table: Reads a whitespace-separated embedding table.
    - featurize_examples: Feature matrix for a dataset.
    - split_dataset: Deterministic 70/10/20 split.
    - generate_shift_scenario: Source and target datasets of a shift scenario.
    - load_dataset / save_dataset: Dataset JSONL files.
"""

import json
import math
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from dirichlet_wrapper.errors import ConfigError, ParseError
from dirichlet_wrapper.utils import fnv1a_64

SPLIT_NAMES = ("train", "validation", "test")
SPLIT_SHARES = (0.7, 0.1, 0.2)
DEFAULT_BOW_DIM = 64

_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class Example:
    """
    One labeled example.

    Attributes:
        example_id (str): Stable identifier.
        label (int): Class index.
        text (Optional[str]): Raw text, if any.
        features (Optional[Tuple[float, ...]]): Precomputed features, if any.
    """

    example_id: str
    label: int
    text: Optional[str] = None
    features: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.text is None and self.features is None:
            raise ConfigError(f"example '{self.example_id}' has neither text nor features")
        if self.features is not None:
            object.__setattr__(self, "features", tuple(float(v) for v in self.features))
        if self.label < 0:
            raise ConfigError(f"example '{self.example_id}' has negative label {self.label}")

    @property
    def feature_array(self) -> np.ndarray:
        return np.asarray(self.features, dtype=float)


@dataclass(frozen=True)
class EmbeddingTable:
    """
    Token embeddings of a common dimension. Unknown tokens contribute nothing.
    """

    vectors: Dict[str, np.ndarray]
    dim: int

    def __post_init__(self):
        for token, vector in self.vectors.items():
            if np.shape(vector) != (self.dim,):
                raise ConfigError(f"embedding for '{token}' has shape {np.shape(vector)}, expected ({self.dim},)")

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class ShiftScenario:
    """
    Parameters of the synthetic source/target pair.

    The source has two unit-covariance Gaussian classes at +-class_separation/2
    on the first axis. The target is the same mixture rotated in the first two
    axes, translated along the second, with labels flipped at noise_flip_rate.
    """

    n_source: int = 2000
    n_target: int = 1000
    dim: int = 16
    class_separation: float = 4.0
    shift_rotation_degrees: float = 35.0
    shift_translation: float = 1.5
    noise_flip_rate: float = 0.05
    seed: int = 7

    def __post_init__(self):
        for name in ("n_source", "n_target", "dim", "class_separation", "shift_rotation_degrees", "shift_translation"):
            if getattr(self, name) < 0:
                raise ConfigError(f"scenario {name} must be non-negative, got {getattr(self, name)}")
        if self.dim < 1:
            raise ConfigError(f"scenario dim must be at least 1, got {self.dim}")
        if not 0 <= self.noise_flip_rate <= 0.5:
            raise ConfigError(f"noise_flip_rate must be in [0, 0.5], got {self.noise_flip_rate}")

    def to_dict(self) -> Dict[str, Union[int, float]]:
        return asdict(self)


@dataclass(frozen=True)
class DatasetSplits:
    """Train/validation/test partition of one dataset."""

    train: List[Example]
    validation: List[Example]
    test: List[Example]

    def items(self) -> Iterator[Tuple[str, List[Example]]]:
        yield "train", self.train
        yield "validation", self.validation
        yield "test", self.test

    def all(self) -> List[Example]:
        return sorted(self.train + self.validation + self.test, key=lambda e: e.example_id)


def tokenize(text: str) -> List[str]:
    """
    Lowercases and splits on runs of non-alphanumeric characters.

    Example:
        >>> tokenize("Good, GOOD -- bad!")
        ['good', 'good', 'bad']
    """
    return _TOKEN_RE.findall(text.lower())


def featurize_hashed_bow(text: str, dim: int) -> np.ndarray:
    """
    Hashed bag-of-words: token t adds 1 at FNV-1a-64(t) mod dim; L2-normalized unless all zero.

    Raises:
        ConfigError: If dim < 1.
    """
    if dim < 1:
        raise ConfigError(f"feature dimension must be >= 1, got {dim}")
    vector = np.zeros(dim)
    for token in tokenize(text):
        vector[fnv1a_64(token) % dim] += 1.0
    norm = np.linalg.norm(vector)
    return vector / norm if norm > 0 else vector


def featurize_avg_embedding(text: str, table: EmbeddingTable) -> np.ndarray:
    """
    Mean of the embeddings of in-vocabulary tokens; zero vector if there are none.

    Raises:
        ConfigError: If the table is empty.
    """
    if len(table) == 0:
        raise ConfigError("embedding table is empty")
    found = [table.vectors[t] for t in tokenize(text) if t in table.vectors]
    if not found:
        return np.zeros(table.dim)
    return np.mean(found, axis=0)


def load_embedding_table(path: Union[str, Path]) -> EmbeddingTable:
    """
    Reads ``token v1 ... vd`` lines (UTF-8, whitespace separated).

    Raises:
        ConfigError: If the file cannot be read or is not UTF-8.
        ParseError: For a line with a non-numeric value or a different dimension.
    """
    source = Path(path)
    try:
        lines = source.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"Failed to read embeddings '{source}': {e}") from e
    vectors: Dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    for line_number, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        token, values = parts[0], parts[1:]
        try:
            vector = np.array([float(v) for v in values])
        except ValueError as e:
            raise ParseError(f"non-numeric embedding value: {e}", str(source), line_number) from e
        if dim is None:
            dim = vector.size
        if vector.size != dim or dim == 0:
            raise ParseError(
                f"embedding has {vector.size} values, expected {dim}", str(source), line_number
            )
        vectors[token] = vector
    if dim is None:
        raise ConfigError(f"embedding table '{source}' is empty")
    logger.info(f"Loaded {len(vectors)} embeddings of dimension {dim} from '{source}'.")
    return EmbeddingTable(vectors=vectors, dim=dim)


def featurize_examples(
    examples: Sequence[Example],
    table: Optional[EmbeddingTable] = None,
    bow_dim: int = DEFAULT_BOW_DIM,
) -> np.ndarray:
    """
    Feature matrix (N, d) for a dataset.

    Precomputed features win when every example has them; otherwise all
    examples need text, featurized by embedding averaging when a table is given
    and by hashed bag-of-words otherwise.

    Raises:
        ConfigError: If some examples have neither usable features nor text.
    """
    if not examples:
        return np.empty((0, bow_dim if table is None else table.dim))
    if all(e.features is not None for e in examples):
        return np.stack([e.feature_array for e in examples])
    missing = [e.example_id for e in examples if e.text is None]
    if missing:
        raise ConfigError(
            f"examples mix precomputed features and text; {len(missing)} lack text (first: '{missing[0]}')"
        )
    if table is not None:
        return np.stack([featurize_avg_embedding(e.text, table) for e in examples])
    return np.stack([featurize_hashed_bow(e.text, bow_dim) for e in examples])


def split_dataset(examples: Sequence[Example], seed: int) -> DatasetSplits:
    """
    Splits 70/10/20 by a seeded shuffle; each split keeps example-id order.
    """
    n = len(examples)
    n_train = int(round(SPLIT_SHARES[0] * n))
    n_validation = int(round(SPLIT_SHARES[1] * n))
    order = np.random.default_rng([seed, 99]).permutation(n)
    parts = np.split(order, [n_train, n_train + n_validation])

    def pick(index: np.ndarray) -> List[Example]:
        return sorted((examples[i] for i in index), key=lambda e: e.example_id)

    return DatasetSplits(train=pick(parts[0]), validation=pick(parts[1]), test=pick(parts[2]))


def _two_class_mixture(
    rng: np.random.Generator, n: int, dim: int, separation: float
) -> Tuple[np.ndarray, np.ndarray]:
    labels = rng.integers(0, 2, size=n)
    points = rng.standard_normal((n, dim))
    points[:, 0] += (2 * labels - 1) * separation / 2.0
    return points, labels


def _to_examples(prefix: str, points: np.ndarray, labels: np.ndarray) -> List[Example]:
    return [
        Example(example_id=f"{prefix}-{i:05d}", label=int(label), features=tuple(point.tolist()))
        for i, (point, label) in enumerate(zip(points, labels))
    ]


def generate_shift_scenario(s: ShiftScenario) -> Tuple[DatasetSplits, DatasetSplits]:
    """
    Generates the source and target datasets of a scenario.

    Args:
        s (ShiftScenario): The scenario; equal scenarios give bit-identical data.

    Returns:
        Tuple[DatasetSplits, DatasetSplits]: Source and target splits (ids ``src-NNNNN`` and ``tgt-NNNNN``).

    Raises:
        ConfigError: If dim < 2 with a non-zero rotation or translation.
    """
    if s.dim < 2 and (s.shift_rotation_degrees != 0 or s.shift_translation != 0):
        raise ConfigError("rotation and translation need at least two feature dimensions")

    source_points, source_labels = _two_class_mixture(
        np.random.default_rng([s.seed, 0]), s.n_source, s.dim, s.class_separation
    )
    target_rng = np.random.default_rng([s.seed, 1])
    target_points, target_labels = _two_class_mixture(target_rng, s.n_target, s.dim, s.class_separation)

    if s.dim >= 2:
        theta = math.radians(s.shift_rotation_degrees)
        rotation = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        target_points[:, :2] = target_points[:, :2] @ rotation.T
        target_points[:, 1] += s.shift_translation
    flips = target_rng.random(s.n_target) < s.noise_flip_rate
    target_labels = np.where(flips, 1 - target_labels, target_labels)

    source = split_dataset(_to_examples("src", source_points, source_labels), s.seed)
    target = split_dataset(_to_examples("tgt", target_points, target_labels), s.seed + 1)
    logger.info(
        f"Generated shift scenario: {s.n_source} source and {s.n_target} target examples "
        f"(dim={s.dim}, rotation={s.shift_rotation_degrees} deg, translation={s.shift_translation}, "
        f"flip={s.noise_flip_rate}, {int(flips.sum())} labels flipped)."
    )
    return source, target


def _parse_example(record: object, path: str, line_number: int) -> Example:
    if not isinstance(record, dict):
        raise ParseError("line is not a JSON object", path, line_number)
    if "example_id" not in record:
        raise ParseError("missing 'example_id'", path, line_number)
    if "label" not in record:
        raise ParseError("missing 'label'", path, line_number)
    label = record["label"]
    if not isinstance(label, int) or isinstance(label, bool):
        raise ParseError(f"label must be an integer, got {label!r}", path, line_number)
    features = record.get("features")
    if features is not None and (
        not isinstance(features, list) or not all(isinstance(v, (int, float)) for v in features)
    ):
        raise ParseError("'features' must be a list of numbers", path, line_number)
    text = record.get("text")
    if text is not None and not isinstance(text, str):
        raise ParseError("'text' must be a string", path, line_number)
    try:
        return Example(example_id=str(record["example_id"]), label=label, text=text, features=features)
    except ConfigError as e:
        raise ParseError(str(e), path, line_number) from e


def load_dataset(path: Union[str, Path]) -> List[Example]:
    """
    Reads a dataset JSONL file, one example per line, blank lines ignored.

    Raises:
        ConfigError: If the file cannot be read.
        ParseError: For malformed lines or mixed feature lengths; cites the 1-based line.
    """
    source = Path(path)
    examples: List[Example] = []
    feature_length: Optional[int] = None
    try:
        handle = source.open("r", encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Failed to read dataset '{source}': {e}") from e
    with handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", str(source), line_number) from e
            example = _parse_example(record, str(source), line_number)
            if example.features is not None:
                if feature_length is None:
                    feature_length = len(example.features)
                elif len(example.features) != feature_length:
                    raise ParseError(
                        f"features have length {len(example.features)}, earlier lines have {feature_length}",
                        str(source),
                        line_number,
                    )
            examples.append(example)
    logger.info(f"Loaded {len(examples)} examples from '{source}'.")
    return examples


def save_dataset(examples: Sequence[Example], path: Union[str, Path]) -> Path:
    """Writes a dataset JSONL file in the given order; absent fields are omitted."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8") as f:
            for example in examples:
                record: Dict[str, object] = {"example_id": example.example_id}
                if example.text is not None:
                    record["text"] = example.text
                if example.features is not None:
                    record["features"] = list(example.features)
                record["label"] = example.label
                f.write(json.dumps(record) + "\n")
    except OSError as e:
        raise ConfigError(f"Failed to write dataset '{target}': {e}") from e
    logger.info(f"Saved {len(examples)} examples to '{target}'.")
    return target
