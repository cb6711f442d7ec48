"""Validated biological sequences, FASTA ingestion, translation, and seeded
sequence synthesis.

DNA is strict uppercase ACGT; ambiguity codes are rejected.  Proteins use the
20 standard one-letter residues.  All random operations take an explicit seed
and are pure functions of it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Union

import numpy as np

from .errors import DataError

DNA_ALPHABET = "ACGT"
PROTEIN_ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
STOP_SYMBOL = "*"
STOP_CODONS = ("TAA", "TAG", "TGA")

_DNA_SET = frozenset(DNA_ALPHABET)
_PROTEIN_SET = frozenset(PROTEIN_ALPHABET)

# Residues for codon index 16*b1 + 4*b2 + b3 with T=0, C=1, A=2, G=3.
_CODON_RESIDUES = "FFLLSSSSYY**CC*WLLLLPPPPHHQQRRRRIIIMTTTTNNKKSSRRVVVVAAAADDEEGGGG"
_CODON_BASE_ORDER = "TCAG"


class EmptySequence(DataError):
    """A sequence with zero characters."""


class InvalidBase(DataError):
    """A character outside ACGT at a known position."""

    def __init__(self, position: int, char: str, record_id: str | None = None):
        self.position = position
        self.char = char
        self.record_id = record_id
        where = f" in record {record_id!r}" if record_id else ""
        super().__init__(f"invalid base {char!r} at position {position}{where}")


class InvalidResidue(DataError):
    """A character outside the 20 standard residues at a known position."""

    def __init__(self, position: int, char: str):
        self.position = position
        self.char = char
        super().__init__(f"invalid residue {char!r} at position {position}")


class MalformedHeader(DataError):
    """FASTA body text before any header, or a header with no id."""


class DuplicateId(DataError):
    """The same record id appears twice in one FASTA stream."""


class TooShort(DataError):
    """A coding sequence shorter than one codon."""


class EmptyTranslation(DataError):
    """A coding sequence whose first codon is a STOP."""


class ZeroLength(DataError):
    """A requested sequence length below 1."""


class RateOutOfRange(DataError):
    """A mutation rate outside [0, 1]."""


@dataclass(frozen=True)
class DnaSeq:
    """Uppercase ACGT string, non-empty."""

    bases: str

    def __post_init__(self):
        if not self.bases:
            raise EmptySequence("DNA sequence is empty")
        for i, ch in enumerate(self.bases):
            if ch not in _DNA_SET:
                raise InvalidBase(i, ch)

    def __len__(self) -> int:
        return len(self.bases)

    def __str__(self) -> str:
        return self.bases

    def prefix(self, n: int) -> "DnaSeq":
        return DnaSeq(self.bases[:n])


@dataclass(frozen=True)
class ProteinSeq:
    """Uppercase one-letter residue string, non-empty."""

    residues: str

    def __post_init__(self):
        if not self.residues:
            raise EmptySequence("protein sequence is empty")
        for i, ch in enumerate(self.residues):
            if ch not in _PROTEIN_SET:
                raise InvalidResidue(i, ch)

    def __len__(self) -> int:
        return len(self.residues)

    def __str__(self) -> str:
        return self.residues


def parse_dna(text: str) -> DnaSeq:
    """Normalize case and validate; reports the first offending position."""
    return DnaSeq(text.upper())


def render_dna(seq: DnaSeq) -> str:
    return seq.bases


@dataclass(frozen=True)
class CodonTable:
    """Codon to one-letter residue map; STOP codons map to ``*``."""

    mapping: dict

    def __post_init__(self):
        if len(self.mapping) != 64:
            raise DataError(f"codon table must have 64 entries, got {len(self.mapping)}")
        for codon, residue in self.mapping.items():
            if len(codon) != 3 or any(b not in _DNA_SET for b in codon):
                raise DataError(f"bad codon key {codon!r}")
            if residue != STOP_SYMBOL and residue not in _PROTEIN_SET:
                raise DataError(f"bad residue {residue!r} for codon {codon!r}")

    @classmethod
    def standard(cls) -> "CodonTable":
        mapping = {}
        for i1, b1 in enumerate(_CODON_BASE_ORDER):
            for i2, b2 in enumerate(_CODON_BASE_ORDER):
                for i3, b3 in enumerate(_CODON_BASE_ORDER):
                    mapping[b1 + b2 + b3] = _CODON_RESIDUES[16 * i1 + 4 * i2 + i3]
        return cls(mapping)

    def stops(self) -> tuple:
        return tuple(sorted(c for c, r in self.mapping.items() if r == STOP_SYMBOL))


_STANDARD_TABLE: CodonTable | None = None


def standard_table() -> CodonTable:
    global _STANDARD_TABLE
    if _STANDARD_TABLE is None:
        _STANDARD_TABLE = CodonTable.standard()
    return _STANDARD_TABLE


def translate_cds(cds: DnaSeq, table: CodonTable | None = None) -> ProteinSeq:
    """Translate codon by codon, stopping at the first STOP.

    Trailing bases past the last full codon are ignored.  A first-codon STOP
    raises EmptyTranslation because the result would be empty.
    """
    if table is None:
        table = standard_table()
    bases = cds.bases
    if len(bases) < 3:
        raise TooShort(f"coding sequence of length {len(bases)} has no full codon")
    residues = []
    for i in range(0, len(bases) - 2, 3):
        residue = table.mapping[bases[i : i + 3]]
        if residue == STOP_SYMBOL:
            break
        residues.append(residue)
    if not residues:
        raise EmptyTranslation("first codon is a STOP")
    return ProteinSeq("".join(residues))


@dataclass(frozen=True)
class FastaRecord:
    id: str
    seq: DnaSeq


def _iter_lines(stream: Union[IO, Iterable[str], Iterable[bytes]]) -> Iterable[str]:
    for line in stream:
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        yield line


def read_fasta(stream, skip_invalid: bool = False) -> list:
    """Parse FASTA records from a text or byte stream.

    With ``skip_invalid`` records whose bodies fail base validation are
    dropped instead of raising; structural problems (body before header,
    duplicate ids) always raise.
    """
    raw: list[tuple[str, list[str]]] = []
    current: list[str] | None = None
    for line_no, line in enumerate(_iter_lines(stream), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith(">"):
            rec_id = line[1:].strip().split()[0] if line[1:].strip() else ""
            if not rec_id:
                raise MalformedHeader(f"line {line_no}: header with no id")
            current = []
            raw.append((rec_id, current))
        else:
            if current is None:
                raise MalformedHeader(f"line {line_no}: sequence data before any header")
            current.append(line.strip())
    seen = set()
    records = []
    for rec_id, body in raw:
        if rec_id in seen:
            raise DuplicateId(f"record id {rec_id!r} appears more than once")
        seen.add(rec_id)
        text = "".join(body)
        try:
            seq = parse_dna(text)
        except (InvalidBase, EmptySequence) as exc:
            if skip_invalid:
                continue
            if isinstance(exc, InvalidBase):
                raise InvalidBase(exc.position, exc.char, record_id=rec_id) from None
            raise EmptySequence(f"record {rec_id!r} has an empty body") from None
        records.append(FastaRecord(rec_id, seq))
    return records


def write_fasta(records: Iterable[FastaRecord], stream: IO, width: int = 60) -> None:
    for rec in records:
        stream.write(f">{rec.id}\n")
        bases = rec.seq.bases
        for i in range(0, len(bases), width):
            stream.write(bases[i : i + width] + "\n")


def random_dna(length: int, seed: int) -> DnaSeq:
    """Uniform i.i.d. bases of the given length."""
    if length < 1:
        raise ZeroLength(f"length must be >= 1, got {length}")
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.integers(0, 4, size=length)
    return DnaSeq("".join(DNA_ALPHABET[i] for i in idx))


def mutate_dna(seq: DnaSeq, sub_rate: float, indel_rate: float, seed: int) -> DnaSeq:
    """Apply per-position substitutions and indels.

    Each position is substituted with probability ``sub_rate`` (uniform over
    the three other bases), and independently either deleted or followed by a
    uniform random insertion, each with probability ``indel_rate / 2``.  With
    ``indel_rate == 0`` the length is preserved.
    """
    for name, rate in (("sub_rate", sub_rate), ("indel_rate", indel_rate)):
        if not 0.0 <= rate <= 1.0:
            raise RateOutOfRange(f"{name} must be in [0, 1], got {rate}")
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for base in seq.bases:
        written = base
        if rng.random() < sub_rate:
            others = [b for b in DNA_ALPHABET if b != base]
            written = others[rng.integers(0, 3)]
        u = rng.random()
        if u < indel_rate / 2.0:
            continue  # deletion
        out.append(written)
        if u >= 1.0 - indel_rate / 2.0:
            out.append(DNA_ALPHABET[rng.integers(0, 4)])
    if not out:
        raise EmptySequence("every base was deleted; raise the seed or lower indel_rate")
    return DnaSeq("".join(out))
