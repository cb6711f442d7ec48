"""Bundled corpora and their generators.

The package ships two data files: a ~1 MB synthetic English corpus (one
sentence per line) and a FASTA file of coding sequences.  Both are produced
by the seeded generators in this module with the frozen constants below, so
a test can regenerate them byte for byte.  The English generator draws real
words from fixed banks with a Zipf-like skew; the name bank covers every
uppercase initial so DNA bases and protein residues are always in the
corpus alphabet.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .seeding import rng_for
from .seqcore import DnaSeq, FastaRecord, read_fasta, write_fasta

ENGLISH_CORPUS_SEED = 271828
ENGLISH_CORPUS_SENTENCES = 19000
CDS_SEED = 314159
CDS_COUNT = 640
CDS_MIN_CODONS = 19  # body codons between the ATG start and the stop
CDS_MAX_CODONS = 78

_DETERMINERS = ["the", "a", "this", "that", "every", "each", "some", "another"]
_ADJECTIVES = [
    "quiet", "bright", "narrow", "heavy", "gentle", "rapid", "shallow", "warm",
    "pale", "steep", "broad", "calm", "crooked", "distant", "early", "faint",
    "golden", "hollow", "late", "modest", "patient", "plain", "round", "rough",
    "silver", "smooth", "steady", "sturdy", "thin", "weary",
]
_NOUNS = [
    "river", "signal", "garden", "window", "market", "teacher", "engine",
    "forest", "letter", "bridge", "harbor", "meadow", "lantern", "village",
    "station", "valley", "painter", "orchard", "kettle", "ladder", "mirror",
    "notebook", "farmer", "sailor", "tunnel", "anchor", "basket", "candle",
    "doorway", "fiddle", "hammer", "island", "jacket", "kitchen", "library",
    "mountain", "needle", "ocean", "pasture", "quarry", "ribbon", "saddle",
    "theater", "umbrella", "vineyard", "wagon", "workshop", "yard", "zither",
    "clock",
]
_VERBS = [
    "crossed", "measured", "watched", "carried", "opened", "followed",
    "repaired", "painted", "reached", "gathered", "lifted", "borrowed",
    "counted", "dropped", "entered", "finished", "guarded", "handed",
    "ignored", "joined", "kept", "loaded", "marked", "noticed", "offered",
    "passed", "questioned", "remembered", "sketched", "traded",
]
_ADVERBS = [
    "slowly", "quietly", "carefully", "suddenly", "gladly", "barely",
    "nearly", "often", "rarely", "together", "alone", "early", "late",
    "twice", "again",
]
_PREPOSITIONS = [
    "near", "above", "behind", "beyond", "inside", "under", "along",
    "around", "past", "within", "beside", "toward",
]
_NAMES = [
    "Alice", "Ben", "Clara", "David", "Elena", "Frank", "Grace", "Henry",
    "Irene", "Jonas", "Karen", "Lewis", "Mona", "Nathan", "Olive", "Peter",
    "Quinn", "Rosa", "Simon", "Tessa", "Ulric", "Vera", "Walter", "Xenia",
    "Yusuf", "Zelda",
]


def _cumulative_zipf(count: int) -> np.ndarray:
    weights = 1.0 / (np.arange(count) + 1.5)
    cum = np.cumsum(weights)
    return cum / cum[-1]


_BANKS = {
    "det": _DETERMINERS,
    "adj": _ADJECTIVES,
    "noun": _NOUNS,
    "verb": _VERBS,
    "adv": _ADVERBS,
    "prep": _PREPOSITIONS,
    "name": _NAMES,
}
_CUMS = {key: _cumulative_zipf(len(words)) for key, words in _BANKS.items()}

_TEMPLATES = [
    ["det", "adj", "noun", "verb", "det", "noun", "prep", "det", "adj", "noun"],
    ["name", "verb", "det", "noun", "adv"],
    ["det", "noun", "prep", "det", "noun", "verb", "det", "adj", "noun"],
    ["name", "and", "name", "verb", "det", "adj", "noun", "prep", "det", "noun"],
    ["det", "noun", "verb", "det", "noun", "because", "det", "noun", "verb", "adv"],
    ["name", "verb", "det", "adj", "noun", "prep", "det", "noun"],
    ["det", "adj", "noun", "verb", "adv", "prep", "det", "noun"],
    ["name", "verb", "that", "det", "noun", "verb", "det", "adj", "noun"],
]


def _pick(bank: str, rng: np.random.Generator) -> str:
    # Inverse-CDF sampling over precomputed cumulative weights; uses only
    # rng.random() so the stream stays easy to reason about.
    cum = _CUMS[bank]
    return _BANKS[bank][int(np.searchsorted(cum, rng.random()))]


def english_sentence(seed: int, index: int) -> str:
    rng = rng_for(seed, "english-sentence", index)
    template = _TEMPLATES[int(rng.integers(len(_TEMPLATES)))]
    words = [slot if slot not in _BANKS else _pick(slot, rng) for slot in template]
    words[0] = words[0][0].upper() + words[0][1:]
    return " ".join(words) + "."


def english_sentences(count: int, seed: int = ENGLISH_CORPUS_SEED) -> list:
    return [english_sentence(seed, i) for i in range(count)]


def generate_cds_records(count: int, seed: int = CDS_SEED) -> list:
    """Coding sequences of the form ATG + sense codons + one stop codon.

    No internal stops, so translation runs the full length and every record
    is usable as both a DNA-pair source (length >= 60) and a translation
    source.
    """
    sense = []
    for b1 in "TCAG":
        for b2 in "TCAG":
            for b3 in "TCAG":
                codon = b1 + b2 + b3
                if codon not in ("TAA", "TAG", "TGA"):
                    sense.append(codon)
    stops = ["TAA", "TAG", "TGA"]
    records = []
    for i in range(count):
        rng = rng_for(seed, "cds", i)
        n_codons = int(rng.integers(CDS_MIN_CODONS, CDS_MAX_CODONS + 1))
        body = "".join(sense[int(rng.integers(len(sense)))] for _ in range(n_codons))
        stop = stops[int(rng.integers(3))]
        records.append(FastaRecord(f"cds{i:04d}", DnaSeq("ATG" + body + stop)))
    return records


def dna_sentences(count: int, seed: int, min_len: int = 60, max_len: int = 200) -> list:
    """Random DNA strings shaped like a line-per-sequence corpus, for token
    statistics and language-model pretraining."""
    out = []
    for i in range(count):
        rng = rng_for(seed, "dna-sentence", i)
        length = int(rng.integers(min_len, max_len + 1))
        idx = rng.integers(0, 4, size=length)
        out.append("".join("ACGT"[k] for k in idx))
    return out


def data_dir() -> Path:
    return Path(__file__).parent / "data"


def english_corpus_path() -> Path:
    return data_dir() / "english_corpus.txt"


def cds_fasta_path() -> Path:
    return data_dir() / "cds_sources.fasta"


def load_english_corpus() -> list:
    return english_corpus_path().read_text(encoding="utf-8").splitlines()


def load_cds_sources() -> list:
    with cds_fasta_path().open("r", encoding="utf-8") as handle:
        return read_fasta(handle)


def build_bundled_data() -> None:
    """Regenerate the two bundled data files in place."""
    data_dir().mkdir(parents=True, exist_ok=True)
    sentences = english_sentences(ENGLISH_CORPUS_SENTENCES)
    english_corpus_path().write_text("\n".join(sentences) + "\n", encoding="utf-8")
    with cds_fasta_path().open("w", encoding="utf-8") as handle:
        write_fasta(generate_cds_records(CDS_COUNT), handle)


if __name__ == "__main__":
    build_bundled_data()
