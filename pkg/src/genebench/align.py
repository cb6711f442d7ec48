"""Local alignment with affine gaps and Karlin-Altschul significance.

The aligner is the labeling oracle for DNA pair datasets, so it favors
clarity over speed: full Gotoh matrices, integer scores, and a deterministic
traceback.  A gap of length k costs ``gap_open + k * gap_extend``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DataError
from .seqcore import DnaSeq

_NEG = -(10**12)  # effectively minus infinity for integer scores


class NonNegativeExpectedScore(DataError):
    """The scheme's expected score is >= 0, so no positive lambda exists."""


class MalformedHitRow(DataError):
    """A row of an external hits table that does not parse."""


@dataclass(frozen=True)
class ScoringScheme:
    """Match/mismatch scores and affine gap penalties (all integers)."""

    match: int = 2
    mismatch: int = -3
    gap_open: int = -5
    gap_extend: int = -2

    def __post_init__(self):
        if self.match <= 0:
            raise DataError(f"match score must be positive, got {self.match}")
        if self.mismatch >= 0:
            raise DataError(f"mismatch score must be negative, got {self.mismatch}")
        if self.gap_open > 0 or self.gap_extend > 0:
            raise DataError("gap penalties must be <= 0")

    def substitution(self, x: str, y: str) -> int:
        return self.match if x == y else self.mismatch


DEFAULT_SCHEME = ScoringScheme()


@dataclass(frozen=True)
class AlignmentResult:
    """Best local alignment: score, identity over its columns, and the
    half-open spans it covers in each sequence."""

    score: int
    identity: float
    span_a: tuple
    span_b: tuple


def smith_waterman(
    a: DnaSeq,
    b: DnaSeq,
    scheme: ScoringScheme = DEFAULT_SCHEME,
    band: int | None = None,
) -> AlignmentResult:
    """Optimal local alignment of ``a`` against ``b``.

    Ties between end cells are broken toward the smallest end index in ``a``,
    then in ``b``; ties inside the traceback prefer diagonal moves, then gaps
    in ``b``, then gaps in ``a``.  ``band`` restricts the search to cells with
    ``|i - j| <= band`` (an accelerator for similar-length pairs); ``None``
    computes the full matrix.
    """
    sa, sb = a.bases, b.bases
    n, m = len(sa), len(sb)
    go, ge = scheme.gap_open, scheme.gap_extend
    match, mismatch = scheme.match, scheme.mismatch

    H = [[0] * (m + 1) for _ in range(n + 1)]
    E = [[_NEG] * (m + 1) for _ in range(n + 1)]  # gap in a (consumes b)
    F = [[_NEG] * (m + 1) for _ in range(n + 1)]  # gap in b (consumes a)

    best, bi, bj = 0, 0, 0
    for i in range(1, n + 1):
        ai = sa[i - 1]
        Hi, Hp = H[i], H[i - 1]
        Ei = E[i]
        Fi, Fp = F[i], F[i - 1]
        for j in range(1, m + 1):
            if band is not None and abs(i - j) > band:
                Hi[j] = _NEG
                continue
            e = max(Hi[j - 1] + go + ge, Ei[j - 1] + ge)
            f = max(Hp[j] + go + ge, Fp[j] + ge)
            sub = match if ai == sb[j - 1] else mismatch
            diag = Hp[j - 1] + sub if Hp[j - 1] != _NEG else _NEG
            h = diag
            if e > h:
                h = e
            if f > h:
                h = f
            if h < 0:
                h = 0
            Ei[j], Fi[j], Hi[j] = e, f, h
            if h > best:
                best, bi, bj = h, i, j

    if best == 0:
        return AlignmentResult(0, 0.0, (0, 0), (0, 0))

    # Traceback from the best cell; state tracks which matrix we are in.
    i, j, state = bi, bj, "H"
    matches = 0
    columns = 0
    while True:
        if state == "H":
            h = H[i][j]
            if h == 0:
                break
            sub = match if sa[i - 1] == sb[j - 1] else mismatch
            if H[i - 1][j - 1] != _NEG and h == H[i - 1][j - 1] + sub:
                columns += 1
                if sa[i - 1] == sb[j - 1]:
                    matches += 1
                i -= 1
                j -= 1
            elif h == F[i][j]:
                state = "F"
            elif h == E[i][j]:
                state = "E"
            else:  # pragma: no cover - would indicate a filled-matrix bug
                raise AssertionError("traceback lost at H cell")
        elif state == "F":
            f = F[i][j]
            columns += 1
            if H[i - 1][j] != _NEG and f == H[i - 1][j] + go + ge:
                state = "H"
            elif f != F[i - 1][j] + ge:  # pragma: no cover
                raise AssertionError("traceback lost at F cell")
            i -= 1
        else:
            e = E[i][j]
            columns += 1
            if H[i][j - 1] != _NEG and e == H[i][j - 1] + go + ge:
                state = "H"
            elif e != E[i][j - 1] + ge:  # pragma: no cover
                raise AssertionError("traceback lost at E cell")
            j -= 1

    return AlignmentResult(
        score=best,
        identity=matches / columns,
        span_a=(i, bi),
        span_b=(j, bj),
    )


@dataclass(frozen=True)
class KarlinParams:
    """Karlin-Altschul parameters: E = K * m * n * exp(-lam * score)."""

    lam: float
    k: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DataError(f"lambda must be positive and finite, got {self.lam}")
        if not (self.k > 0 and math.isfinite(self.k)):
            raise DataError(f"K must be positive and finite, got {self.k}")


UNIFORM_COMPOSITION = (0.25, 0.25, 0.25, 0.25)


def estimate_lambda(scheme: ScoringScheme, composition=UNIFORM_COMPOSITION) -> float:
    """Unique positive root of sum_ij p_i p_j exp(lambda * s(i, j)) = 1.

    With match/mismatch scoring the sum collapses to a two-term equation in
    P(match) = sum_i p_i**2.  Solved by bisection; the returned root satisfies
    the equation to well under 1e-8.
    """
    p = np.asarray(composition, dtype=float)
    if p.shape != (4,):
        raise DataError(f"composition must have 4 entries, got shape {p.shape}")
    if np.any(p <= 0.0):
        raise DataError("composition entries must be positive")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise DataError(f"composition must sum to 1, got {float(p.sum())!r}")

    q = float(np.dot(p, p))
    expected = q * scheme.match + (1.0 - q) * scheme.mismatch
    if expected >= 0.0:
        raise NonNegativeExpectedScore(
            f"expected score {expected:.6f} is non-negative; "
            "lambda is undefined for this scheme and composition"
        )

    def f(lam: float) -> float:
        return q * math.exp(lam * scheme.match) + (1.0 - q) * math.exp(lam * scheme.mismatch) - 1.0

    # f(0) = 0 and f'(0) = expected < 0, so the positive root is bracketed by
    # a small lo with f(lo) < 0 and a hi found by doubling.
    lo = 1e-12
    while f(lo) >= 0.0 and lo > 1e-300:
        lo /= 2.0
    hi = 1.0
    while f(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e9:
            raise DataError("failed to bracket lambda")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def evalue(score: int, m: int, n: int, params: KarlinParams) -> float:
    """Expected number of chance alignments scoring at least ``score``."""
    if m < 1 or n < 1:
        raise DataError(f"sequence lengths must be >= 1, got m={m}, n={n}")
    return params.k * m * n * math.exp(-params.lam * score)


class Homology(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    AMBIGUOUS = "ambiguous"


_DEFAULT_KARLIN: KarlinParams | None = None


def default_karlin(scheme: ScoringScheme = DEFAULT_SCHEME) -> KarlinParams:
    """Lambda for the default scheme under uniform composition, with the
    conventional short-sequence K = 0.1."""
    global _DEFAULT_KARLIN
    if _DEFAULT_KARLIN is None or scheme != DEFAULT_SCHEME:
        params = KarlinParams(lam=estimate_lambda(scheme), k=0.1)
        if scheme != DEFAULT_SCHEME:
            return params
        _DEFAULT_KARLIN = params
    return _DEFAULT_KARLIN


@dataclass(frozen=True)
class HomologyConfig:
    """Thresholds for the three-way homology call.

    POSITIVE requires an E-value below ``evalue_threshold``.  NEGATIVE
    requires an E-value at or above ``negative_min_evalue`` and identity at
    or below ``negative_max_identity``; the default identity cap of 1.0
    disables that filter, since short chance alignments are often perfect
    matches.  Everything in between is AMBIGUOUS and should be resampled.
    """

    scheme: ScoringScheme = DEFAULT_SCHEME
    karlin: KarlinParams | None = None
    evalue_threshold: float = 1e-5
    negative_min_evalue: float = 1e-3
    negative_max_identity: float = 1.0

    def __post_init__(self):
        if self.karlin is None:
            object.__setattr__(self, "karlin", default_karlin(self.scheme))
        if not 0.0 < self.evalue_threshold < self.negative_min_evalue:
            raise DataError(
                "need 0 < evalue_threshold < negative_min_evalue, got "
                f"{self.evalue_threshold!r} and {self.negative_min_evalue!r}"
            )
        if not 0.0 <= self.negative_max_identity <= 1.0:
            raise DataError(
                f"negative_max_identity must be in [0, 1], got {self.negative_max_identity!r}"
            )


def classify_alignment(
    result: AlignmentResult, len_a: int, len_b: int, cfg: HomologyConfig
) -> Homology:
    ev = evalue(result.score, len_a, len_b, cfg.karlin)
    if ev < cfg.evalue_threshold:
        return Homology.POSITIVE
    if ev >= cfg.negative_min_evalue and result.identity <= cfg.negative_max_identity:
        return Homology.NEGATIVE
    return Homology.AMBIGUOUS


def is_homologous(a: DnaSeq, b: DnaSeq, cfg: HomologyConfig | None = None) -> Homology:
    """Three-way homology call from the local alignment of ``a`` and ``b``."""
    if cfg is None:
        cfg = HomologyConfig()
    result = smith_waterman(a, b, cfg.scheme)
    return classify_alignment(result, len(a), len(b), cfg)


@dataclass(frozen=True)
class ExternalHit:
    """One row of an externally computed hits table."""

    id_a: str
    id_b: str
    score: int
    evalue: float


def read_hits_table(stream) -> dict:
    """Parse tab-separated ``id_a  id_b  score  evalue`` rows.

    Lets precomputed search results (for example from a full BLAST run)
    stand in for the built-in aligner.  Returns a dict keyed by (id_a, id_b).
    """
    hits: dict[tuple, ExternalHit] = {}
    for line_no, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise MalformedHitRow(f"line {line_no}: expected 4 tab-separated fields")
        id_a, id_b, score_text, evalue_text = parts
        try:
            score = int(score_text)
            ev = float(evalue_text)
        except ValueError:
            raise MalformedHitRow(f"line {line_no}: bad score or evalue") from None
        key = (id_a, id_b)
        if key in hits:
            raise MalformedHitRow(f"line {line_no}: duplicate pair {key!r}")
        hits[key] = ExternalHit(id_a, id_b, score, ev)
    return hits


# Dict round-trips used by dataset manifests.

def scheme_to_dict(scheme: ScoringScheme) -> dict:
    return {
        "match": scheme.match,
        "mismatch": scheme.mismatch,
        "gap_open": scheme.gap_open,
        "gap_extend": scheme.gap_extend,
    }


def scheme_from_dict(d: dict) -> ScoringScheme:
    return ScoringScheme(
        match=int(d["match"]),
        mismatch=int(d["mismatch"]),
        gap_open=int(d["gap_open"]),
        gap_extend=int(d["gap_extend"]),
    )


def homology_config_to_dict(cfg: HomologyConfig) -> dict:
    return {
        "scheme": scheme_to_dict(cfg.scheme),
        "lambda": cfg.karlin.lam,
        "karlin_k": cfg.karlin.k,
        "evalue_threshold": cfg.evalue_threshold,
        "negative_min_evalue": cfg.negative_min_evalue,
        "negative_max_identity": cfg.negative_max_identity,
    }


def homology_config_from_dict(d: dict) -> HomologyConfig:
    return HomologyConfig(
        scheme=scheme_from_dict(d["scheme"]),
        karlin=KarlinParams(lam=float(d["lambda"]), k=float(d["karlin_k"])),
        evalue_threshold=float(d["evalue_threshold"]),
        negative_min_evalue=float(d["negative_min_evalue"]),
        negative_max_identity=float(d["negative_max_identity"]),
    )
