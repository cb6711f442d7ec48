"""Balanced sentence-pair datasets over DNA, DNA-protein, and English text.

Every dataset uses the same JSONL record shape: objects with exactly the keys
``sentence1``, ``sentence2``, ``label``, where label 1 means the pair is
similar or corresponding and 0 means it is not.  DNA pair labels are backed
by the alignment oracle and DNA-protein labels by exact re-translation, so a
generated file can always be re-verified from scratch.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .align import (
    Homology,
    HomologyConfig,
    homology_config_from_dict,
    homology_config_to_dict,
    is_homologous,
)
from .errors import DataError
from .seeding import check_seed, derive_seed, rng_for
from .seqcore import (
    DnaSeq,
    EmptyTranslation,
    FastaRecord,
    InvalidBase,
    TooShort,
    mutate_dna,
    parse_dna,
    random_dna,
    translate_cds,
)


class TaskKind(Enum):
    DNA_PAIR = "dna_pair"
    DNA_PROTEIN_PAIR = "dna_protein_pair"
    TEXT_PAIR = "text_pair"


class InsufficientSources(DataError):
    """Too few usable source records to draw pairs from."""


class RetryBudgetExhausted(DataError):
    """A record could not be generated within the retry budget."""


class UntranslatableRecord(DataError):
    """A coding source record that does not translate."""


class CorpusTooSmall(DataError):
    """Fewer than two distinct sentences to pair."""


class MalformedLine(DataError):
    """A JSONL line that is not an object with exactly the expected keys."""


class MissingField(DataError):
    """A JSONL object lacking one of the required keys."""


class NonBinaryLabel(DataError):
    """A label that is not the integer 0 or 1."""


class BadFractions(DataError):
    """Split fractions that are not three positive floats summing to 1."""


@dataclass(frozen=True)
class PairRecord:
    """One classification example: two sentences and a binary label."""

    sentence1: str
    sentence2: str
    label: int

    def __post_init__(self):
        for name in ("sentence1", "sentence2"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise DataError(f"{name} must be a non-empty string")
        if isinstance(self.label, bool) or self.label not in (0, 1):
            raise NonBinaryLabel(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class DatasetManifest:
    task: TaskKind | None
    n_total: int
    n_positive: int
    n_negative: int
    seed: int
    generator_config_digest: str

    def __post_init__(self):
        if self.n_positive < 0 or self.n_negative < 0:
            raise DataError("manifest counts must be non-negative")
        if self.n_total != self.n_positive + self.n_negative:
            raise DataError(
                f"manifest counts disagree: {self.n_total} != "
                f"{self.n_positive} + {self.n_negative}"
            )


@dataclass
class PairDataset:
    records: list
    manifest: DatasetManifest
    generator_config: dict | None = None

    def __len__(self) -> int:
        return len(self.records)

    def counts(self) -> tuple:
        pos = sum(r.label for r in self.records)
        return pos, len(self.records) - pos

    def validate(self) -> None:
        pos, neg = self.counts()
        if (pos, neg) != (self.manifest.n_positive, self.manifest.n_negative):
            raise DataError(
                f"records disagree with manifest: {pos}/{neg} vs "
                f"{self.manifest.n_positive}/{self.manifest.n_negative}"
            )


def config_digest(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class DnaPairConfig:
    """Similar pairs are mutated 40 bp prefixes verified POSITIVE; dissimilar
    pairs are random or cross-source sequences verified NEGATIVE."""

    n: int
    seq_len: int = 40
    sub_rate: float = 0.10
    indel_rate: float = 0.02
    length_tolerance: float = 0.10
    homology: HomologyConfig = field(default_factory=HomologyConfig)
    max_retries: int = 20
    seed: int = 0

    def __post_init__(self):
        _check_pair_count(self.n)
        if self.seq_len < 4:
            raise DataError(f"seq_len must be >= 4, got {self.seq_len}")
        if not 0.0 <= self.length_tolerance < 1.0:
            raise DataError(f"length_tolerance must be in [0, 1), got {self.length_tolerance}")
        if self.max_retries < 1:
            raise DataError("max_retries must be >= 1")
        check_seed(self.seed)

    def to_dict(self) -> dict:
        return {
            "task": TaskKind.DNA_PAIR.value,
            "n": self.n,
            "seq_len": self.seq_len,
            "sub_rate": self.sub_rate,
            "indel_rate": self.indel_rate,
            "length_tolerance": self.length_tolerance,
            "homology": homology_config_to_dict(self.homology),
            "max_retries": self.max_retries,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DnaPairConfig":
        return cls(
            n=int(d["n"]),
            seq_len=int(d["seq_len"]),
            sub_rate=float(d["sub_rate"]),
            indel_rate=float(d["indel_rate"]),
            length_tolerance=float(d["length_tolerance"]),
            homology=homology_config_from_dict(d["homology"]),
            max_retries=int(d["max_retries"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class DnaProteinConfig:
    """Corresponding pairs are (cds, translation of that cds); mismatched
    pairs borrow the translation of a different source record."""

    n: int
    dna_len_cap: int | None = None
    max_retries: int = 20
    seed: int = 0

    def __post_init__(self):
        _check_pair_count(self.n)
        if self.dna_len_cap is not None and self.dna_len_cap < 3:
            raise DataError(f"dna_len_cap must be >= 3, got {self.dna_len_cap}")
        if self.max_retries < 1:
            raise DataError("max_retries must be >= 1")
        check_seed(self.seed)

    def to_dict(self) -> dict:
        return {
            "task": TaskKind.DNA_PROTEIN_PAIR.value,
            "n": self.n,
            "dna_len_cap": self.dna_len_cap,
            "max_retries": self.max_retries,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DnaProteinConfig":
        cap = d["dna_len_cap"]
        return cls(
            n=int(d["n"]),
            dna_len_cap=None if cap is None else int(cap),
            max_retries=int(d["max_retries"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class TextPairConfig:
    """Similar pairs are a sentence plus a word-noised copy; dissimilar pairs
    are two distinct corpus sentences."""

    n: int
    noise: float = 0.1
    max_retries: int = 20
    seed: int = 0

    def __post_init__(self):
        _check_pair_count(self.n)
        if not 0.0 <= self.noise <= 1.0:
            raise DataError(f"noise must be in [0, 1], got {self.noise}")
        if self.max_retries < 1:
            raise DataError("max_retries must be >= 1")
        check_seed(self.seed)

    def to_dict(self) -> dict:
        return {
            "task": TaskKind.TEXT_PAIR.value,
            "n": self.n,
            "noise": self.noise,
            "max_retries": self.max_retries,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TextPairConfig":
        return cls(
            n=int(d["n"]),
            noise=float(d["noise"]),
            max_retries=int(d["max_retries"]),
            seed=int(d["seed"]),
        )


def _check_pair_count(n: int) -> None:
    if n < 2 or n % 2 != 0:
        raise DataError(f"n must be an even integer >= 2, got {n}")


def _shuffled(records: list, seed: int, label: str) -> list:
    perm = rng_for(seed, label).permutation(len(records))
    return [records[int(k)] for k in perm]


def gen_dna_pairs(sources: list, cfg: DnaPairConfig) -> PairDataset:
    """Alignment-verified DNA pairs from FASTA source records.

    Positives take a ``seq_len`` prefix of a source and a mutated copy;
    negatives pair a prefix with random DNA or another source's prefix of a
    length within the tolerance.  Records whose oracle call comes back
    AMBIGUOUS (or on the wrong side) are resampled up to ``max_retries``
    times.  Sources are drawn with replacement.
    """
    eligible = [r for r in sources if len(r.seq) >= cfg.seq_len]
    if len(eligible) < 2:
        raise InsufficientSources(
            f"need >= 2 source records of length >= {cfg.seq_len}, got {len(eligible)}"
        )
    half = cfg.n // 2
    records = []
    for i in range(half):
        rec = None
        for attempt in range(cfg.max_retries):
            rng = rng_for(cfg.seed, f"dna-pair/pos/a{attempt}", i)
            src = eligible[int(rng.integers(len(eligible)))]
            s1 = src.seq.prefix(cfg.seq_len)
            s2 = mutate_dna(
                s1,
                cfg.sub_rate,
                cfg.indel_rate,
                derive_seed(cfg.seed, f"dna-pair/pos-mut/a{attempt}", i),
            )
            if is_homologous(s1, s2, cfg.homology) is Homology.POSITIVE:
                rec = PairRecord(s1.bases, s2.bases, 1)
                break
        if rec is None:
            raise RetryBudgetExhausted(
                f"positive record {i}: no POSITIVE pair in {cfg.max_retries} attempts"
            )
        records.append(rec)
    lo = max(1, math.ceil(cfg.seq_len * (1.0 - cfg.length_tolerance)))
    hi = math.floor(cfg.seq_len * (1.0 + cfg.length_tolerance))
    for i in range(half):
        rec = None
        for attempt in range(cfg.max_retries):
            rng = rng_for(cfg.seed, f"dna-pair/neg/a{attempt}", i)
            idx1 = int(rng.integers(len(eligible)))
            s1 = eligible[idx1].seq.prefix(cfg.seq_len)
            len2 = int(rng.integers(lo, hi + 1))
            if rng.random() < 0.5:
                s2 = random_dna(
                    len2, derive_seed(cfg.seed, f"dna-pair/neg-rand/a{attempt}", i)
                )
            else:
                idx2 = int(rng.integers(len(eligible) - 1))
                if idx2 >= idx1:
                    idx2 += 1
                other = eligible[idx2].seq
                s2 = other.prefix(min(len2, len(other)))
            if s1.bases == s2.bases:
                continue
            if is_homologous(s1, s2, cfg.homology) is Homology.NEGATIVE:
                rec = PairRecord(s1.bases, s2.bases, 0)
                break
        if rec is None:
            raise RetryBudgetExhausted(
                f"negative record {i}: no NEGATIVE pair in {cfg.max_retries} attempts"
            )
        records.append(rec)
    shuffled = _shuffled(records, cfg.seed, "dna-pair/shuffle")
    digest = config_digest(cfg.to_dict())
    manifest = DatasetManifest(TaskKind.DNA_PAIR, cfg.n, half, half, cfg.seed, digest)
    return PairDataset(shuffled, manifest, generator_config=cfg.to_dict())


def _capped(seq: DnaSeq, cap: int | None) -> DnaSeq:
    if cap is None or len(seq) <= cap:
        return seq
    return seq.prefix(cap)


def gen_dna_protein_pairs(sources: list, cfg: DnaProteinConfig) -> PairDataset:
    """Coding-sequence/protein pairs with exact translation closure.

    Every source must translate (after the optional length cap); label-1
    records satisfy ``translate_cds(sentence1) == sentence2`` exactly, and
    label-0 records pair a cds with the translation of a different source
    whose protein differs.
    """
    if len(sources) < 2:
        raise InsufficientSources(f"need >= 2 source records, got {len(sources)}")
    dnas = []
    proteins = []
    for record in sources:
        capped = _capped(record.seq, cfg.dna_len_cap)
        try:
            protein = translate_cds(capped)
        except (TooShort, EmptyTranslation) as exc:
            raise UntranslatableRecord(f"record {record.id!r}: {exc}") from None
        dnas.append(capped.bases)
        proteins.append(protein.residues)
    half = cfg.n // 2
    records = []
    for i in range(half):
        rng = rng_for(cfg.seed, "dna-protein/pos", i)
        k = int(rng.integers(len(sources)))
        records.append(PairRecord(dnas[k], proteins[k], 1))
    for i in range(half):
        rec = None
        for attempt in range(cfg.max_retries):
            rng = rng_for(cfg.seed, f"dna-protein/neg/a{attempt}", i)
            k = int(rng.integers(len(sources)))
            j = int(rng.integers(len(sources) - 1))
            if j >= k:
                j += 1
            if proteins[j] != proteins[k]:
                rec = PairRecord(dnas[k], proteins[j], 0)
                break
        if rec is None:
            raise RetryBudgetExhausted(
                f"negative record {i}: all sampled proteins identical after "
                f"{cfg.max_retries} attempts"
            )
        records.append(rec)
    shuffled = _shuffled(records, cfg.seed, "dna-protein/shuffle")
    digest = config_digest(cfg.to_dict())
    manifest = DatasetManifest(
        TaskKind.DNA_PROTEIN_PAIR, cfg.n, half, half, cfg.seed, digest
    )
    return PairDataset(shuffled, manifest, generator_config=cfg.to_dict())


def gen_text_pairs(corpus: list, cfg: TextPairConfig) -> PairDataset:
    """Sentence pairs from a text corpus.

    Positives whitespace-normalize a sentence and replace each word with a
    random vocabulary word with probability ``noise``; negatives pair two
    distinct sentences.
    """
    sentences = [s for s in corpus if s.strip()]
    if len(set(sentences)) < 2:
        raise CorpusTooSmall(
            f"need >= 2 distinct non-blank sentences, got {len(set(sentences))}"
        )
    vocab = sorted({w for s in sentences for w in s.split()})
    half = cfg.n // 2
    records = []
    for i in range(half):
        rng = rng_for(cfg.seed, "text-pair/pos", i)
        words = sentences[int(rng.integers(len(sentences)))].split()
        noisy = []
        for w in words:
            if len(vocab) > 1 and rng.random() < cfg.noise:
                repl = w
                while repl == w:
                    repl = vocab[int(rng.integers(len(vocab)))]
                noisy.append(repl)
            else:
                noisy.append(w)
        records.append(PairRecord(" ".join(words), " ".join(noisy), 1))
    for i in range(half):
        rec = None
        for attempt in range(cfg.max_retries):
            rng = rng_for(cfg.seed, f"text-pair/neg/a{attempt}", i)
            s = sentences[int(rng.integers(len(sentences)))]
            t = sentences[int(rng.integers(len(sentences)))]
            if s != t:
                rec = PairRecord(" ".join(s.split()), " ".join(t.split()), 0)
                break
        if rec is None:
            raise RetryBudgetExhausted(f"negative record {i}: corpus too repetitive")
        records.append(rec)
    shuffled = _shuffled(records, cfg.seed, "text-pair/shuffle")
    digest = config_digest(cfg.to_dict())
    manifest = DatasetManifest(TaskKind.TEXT_PAIR, cfg.n, half, half, cfg.seed, digest)
    return PairDataset(shuffled, manifest, generator_config=cfg.to_dict())


_RECORD_KEYS = ("sentence1", "sentence2", "label")


def record_to_json(record: PairRecord) -> str:
    return json.dumps(
        {"sentence1": record.sentence1, "sentence2": record.sentence2, "label": record.label},
        ensure_ascii=False,
    )


def write_jsonl(dataset: PairDataset, stream) -> None:
    for record in dataset.records:
        stream.write(record_to_json(record) + "\n")


def read_jsonl(stream) -> PairDataset:
    """Strictly parse JSONL records; the manifest is reconstructed from the
    records themselves (task unknown)."""
    records = []
    for line_no, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.rstrip("\n")
        if not line:
            raise MalformedLine(f"line {line_no}: blank line")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise MalformedLine(f"line {line_no}: not valid JSON") from None
        if not isinstance(obj, dict):
            raise MalformedLine(f"line {line_no}: not a JSON object")
        for key in _RECORD_KEYS:
            if key not in obj:
                raise MissingField(f"line {line_no}: missing {key!r}")
        extra = set(obj) - set(_RECORD_KEYS)
        if extra:
            raise MalformedLine(f"line {line_no}: unexpected keys {sorted(extra)}")
        label = obj["label"]
        if isinstance(label, bool) or not isinstance(label, int) or label not in (0, 1):
            raise NonBinaryLabel(f"line {line_no}: label must be 0 or 1, got {label!r}")
        for key in ("sentence1", "sentence2"):
            if not isinstance(obj[key], str) or not obj[key]:
                raise MalformedLine(f"line {line_no}: {key} must be a non-empty string")
        records.append(PairRecord(obj["sentence1"], obj["sentence2"], label))
    pos = sum(r.label for r in records)
    manifest = DatasetManifest(None, len(records), pos, len(records) - pos, 0, "")
    return PairDataset(records, manifest)


def manifest_path(jsonl_path) -> Path:
    path = Path(jsonl_path)
    if path.suffix == ".jsonl":
        return path.with_suffix(".manifest.json")
    return path.with_name(path.name + ".manifest.json")


def manifest_to_dict(dataset: PairDataset) -> dict:
    m = dataset.manifest
    out = {
        "task": m.task.value if m.task else None,
        "n_total": m.n_total,
        "n_positive": m.n_positive,
        "n_negative": m.n_negative,
        "seed": m.seed,
        "generator_config_digest": m.generator_config_digest,
    }
    if dataset.generator_config is not None:
        out["generator_config"] = dataset.generator_config
    return out


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory plus rename, so failed
    runs never leave partial output."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def save_dataset(dataset: PairDataset, path) -> None:
    dataset.validate()
    lines = [record_to_json(r) + "\n" for r in dataset.records]
    atomic_write_text(path, "".join(lines))
    sidecar = json.dumps(manifest_to_dict(dataset), indent=2, sort_keys=True) + "\n"
    atomic_write_text(manifest_path(path), sidecar)


def load_dataset(path) -> PairDataset:
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        dataset = read_jsonl(handle)
    side = manifest_path(path)
    if side.exists():
        info = json.loads(side.read_text(encoding="utf-8"))
        task = TaskKind(info["task"]) if info.get("task") else None
        manifest = DatasetManifest(
            task,
            int(info["n_total"]),
            int(info["n_positive"]),
            int(info["n_negative"]),
            int(info["seed"]),
            str(info["generator_config_digest"]),
        )
        dataset = PairDataset(dataset.records, manifest, info.get("generator_config"))
        dataset.validate()
    return dataset


def _allocate(count: int, fractions) -> list:
    base = [math.floor(count * f) for f in fractions]
    remainder = count - sum(base)
    order = sorted(
        range(len(fractions)),
        key=lambda i: (-(count * fractions[i] - base[i]), i),
    )
    for i in order[:remainder]:
        base[i] += 1
    return base


def split_dataset(dataset: PairDataset, fractions, seed: int) -> tuple:
    """Stratified train/dev/test split.

    Each class is permuted separately and allocated by largest remainder, so
    split sizes are exact for round fractions and every split stays balanced
    within one record.
    """
    if len(fractions) != 3 or any(not f > 0.0 for f in fractions):
        raise BadFractions(f"need three positive fractions, got {fractions!r}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f"fractions must sum to 1, got {sum(fractions)!r}")
    by_class = {0: [], 1: []}
    for idx, record in enumerate(dataset.records):
        by_class[record.label].append(idx)
    parts: list[list[int]] = [[], [], []]
    for label, indices in sorted(by_class.items()):
        perm = rng_for(seed, f"split/class{label}").permutation(len(indices))
        shuffled = [indices[int(k)] for k in perm]
        sizes = _allocate(len(indices), fractions)
        start = 0
        for part, size in zip(parts, sizes):
            part.extend(shuffled[start : start + size])
            start += size
    out = []
    for part in parts:
        records = [dataset.records[i] for i in sorted(part)]
        pos = sum(r.label for r in records)
        manifest = DatasetManifest(
            dataset.manifest.task,
            len(records),
            pos,
            len(records) - pos,
            seed,
            dataset.manifest.generator_config_digest,
        )
        out.append(PairDataset(records, manifest, dataset.generator_config))
    return tuple(out)


@dataclass
class VerificationReport:
    task: TaskKind
    n: int
    issues: list

    @property
    def ok(self) -> bool:
        return not self.issues


def verify_dataset(
    dataset: PairDataset,
    task: TaskKind | None = None,
    homology_cfg: HomologyConfig | None = None,
) -> VerificationReport:
    """Re-derive every label with the task's oracle and report disagreements.

    DNA pairs re-run the homology call (using the generator's thresholds from
    the sidecar when available); DNA-protein pairs re-translate sentence1.
    Text pairs have no oracle, so only structure and balance are checked.
    Issue line numbers are 1-based positions in the JSONL file.
    """
    task = task or dataset.manifest.task
    if task is None:
        raise DataError("task is unknown; pass it explicitly or provide a manifest")
    issues = []
    pos, neg = dataset.counts()
    if abs(pos - neg) > 1:
        issues.append((0, f"unbalanced: {pos} positive vs {neg} negative"))
    if task is TaskKind.DNA_PAIR:
        if homology_cfg is None:
            if dataset.generator_config and "homology" in dataset.generator_config:
                homology_cfg = homology_config_from_dict(
                    dataset.generator_config["homology"]
                )
            else:
                homology_cfg = HomologyConfig()
        for idx, record in enumerate(dataset.records):
            line_no = idx + 1
            try:
                a = parse_dna(record.sentence1)
                b = parse_dna(record.sentence2)
            except (InvalidBase, Exception) as exc:
                if not isinstance(exc, DataError):
                    raise
                issues.append((line_no, f"bad sequence: {exc}"))
                continue
            call = is_homologous(a, b, homology_cfg)
            expected = Homology.POSITIVE if record.label == 1 else Homology.NEGATIVE
            if call is not expected:
                issues.append(
                    (line_no, f"label {record.label} but oracle says {call.value}")
                )
    elif task is TaskKind.DNA_PROTEIN_PAIR:
        for idx, record in enumerate(dataset.records):
            line_no = idx + 1
            try:
                protein = translate_cds(parse_dna(record.sentence1)).residues
            except DataError as exc:
                issues.append((line_no, f"sentence1 does not translate: {exc}"))
                continue
            corresponds = protein == record.sentence2
            if corresponds != (record.label == 1):
                issues.append(
                    (line_no, f"label {record.label} but translation closure says "
                              f"{int(corresponds)}")
                )
    elif task is TaskKind.TEXT_PAIR:
        for idx, record in enumerate(dataset.records):
            if record.label == 0 and record.sentence1 == record.sentence2:
                issues.append((idx + 1, "negative pair with identical sentences"))
    return VerificationReport(task, len(dataset.records), issues)
