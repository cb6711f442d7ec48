"""Sequence types, FASTA parsing, translation, and seeded synthesis."""

import io

import pytest

from genebench.seeding import derive_seed, rng_for
from genebench.seqcore import (
    CodonTable,
    DnaSeq,
    DuplicateId,
    EmptySequence,
    EmptyTranslation,
    FastaRecord,
    InvalidBase,
    InvalidResidue,
    MalformedHeader,
    ProteinSeq,
    RateOutOfRange,
    TooShort,
    ZeroLength,
    mutate_dna,
    parse_dna,
    random_dna,
    read_fasta,
    render_dna,
    translate_cds,
    write_fasta,
)
from genebench.errors import UsageError

# Standard genetic code transcribed row by row from the classic wet-lab
# table (first base T, C, A, G), independent of the package's encoding.
GOLDEN_CODE = {
    "TTT": "F", "TTC": "F", "TTA": "L", "TTG": "L",
    "TCT": "S", "TCC": "S", "TCA": "S", "TCG": "S",
    "TAT": "Y", "TAC": "Y", "TAA": "*", "TAG": "*",
    "TGT": "C", "TGC": "C", "TGA": "*", "TGG": "W",
    "CTT": "L", "CTC": "L", "CTA": "L", "CTG": "L",
    "CCT": "P", "CCC": "P", "CCA": "P", "CCG": "P",
    "CAT": "H", "CAC": "H", "CAA": "Q", "CAG": "Q",
    "CGT": "R", "CGC": "R", "CGA": "R", "CGG": "R",
    "ATT": "I", "ATC": "I", "ATA": "I", "ATG": "M",
    "ACT": "T", "ACC": "T", "ACA": "T", "ACG": "T",
    "AAT": "N", "AAC": "N", "AAA": "K", "AAG": "K",
    "AGT": "S", "AGC": "S", "AGA": "R", "AGG": "R",
    "GTT": "V", "GTC": "V", "GTA": "V", "GTG": "V",
    "GCT": "A", "GCC": "A", "GCA": "A", "GCG": "A",
    "GAT": "D", "GAC": "D", "GAA": "E", "GAG": "E",
    "GGT": "G", "GGC": "G", "GGA": "G", "GGG": "G",
}


class TestDnaParsing:
    def test_parse_normalizes_case(self):
        assert parse_dna("acgT").bases == "ACGT"

    def test_parse_rejects_first_bad_char(self):
        with pytest.raises(InvalidBase) as err:
            parse_dna("ACGU")
        assert err.value.position == 3
        assert err.value.char == "U"

    def test_parse_rejects_ambiguity_codes(self):
        with pytest.raises(InvalidBase):
            parse_dna("ACGN")

    def test_empty_rejected(self):
        with pytest.raises(EmptySequence):
            parse_dna("")

    def test_render_parse_round_trip(self):
        for i in range(50):
            seq = random_dna(1 + i, seed=derive_seed(9, "round-trip", i))
            assert parse_dna(render_dna(seq)) == seq

    def test_protein_validation(self):
        assert len(ProteinSeq("MKV")) == 3
        with pytest.raises(InvalidResidue) as err:
            ProteinSeq("MK*")
        assert err.value.position == 2
        with pytest.raises(EmptySequence):
            ProteinSeq("")


class TestCodonTable:
    def test_matches_golden_table(self):
        table = CodonTable.standard()
        assert len(table.mapping) == 64
        for codon, residue in GOLDEN_CODE.items():
            assert table.mapping[codon] == residue, codon

    def test_exactly_three_stops(self):
        assert CodonTable.standard().stops() == ("TAA", "TAG", "TGA")

    def test_rejects_wrong_size(self):
        bad = dict(GOLDEN_CODE)
        del bad["TTT"]
        with pytest.raises(Exception):
            CodonTable(bad)


class TestTranslate:
    def test_simple(self):
        assert translate_cds(parse_dna("ATGGCC")).residues == "MA"

    def test_stops_at_first_stop(self):
        assert translate_cds(parse_dna("ATGTAAGGGCCC")).residues == "M"
        assert translate_cds(parse_dna("ATGTAGGGG")).residues == "M"
        assert translate_cds(parse_dna("ATGTGAGGG")).residues == "M"

    def test_trailing_partial_codon_ignored(self):
        assert translate_cds(parse_dna("ATGGCCGG")).residues == "MA"

    def test_too_short(self):
        with pytest.raises(TooShort):
            translate_cds(parse_dna("AT"))

    def test_first_codon_stop(self):
        with pytest.raises(EmptyTranslation):
            translate_cds(parse_dna("TAAATG"))

    def test_every_sense_codon_translates(self):
        table = CodonTable.standard()
        for codon, residue in GOLDEN_CODE.items():
            if residue == "*":
                continue
            assert translate_cds(parse_dna(codon), table).residues == residue


class TestFasta:
    def test_parse_two_records(self):
        text = ">a desc words\nACGT\nACGT\n\n>b\nTTTT\n"
        records = read_fasta(io.StringIO(text))
        assert [r.id for r in records] == ["a", "b"]
        assert records[0].seq.bases == "ACGTACGT"
        assert records[1].seq.bases == "TTTT"

    def test_byte_stream(self):
        records = read_fasta(io.BytesIO(b">x\nacgt\n"))
        assert records[0].seq.bases == "ACGT"

    def test_body_before_header(self):
        with pytest.raises(MalformedHeader):
            read_fasta(io.StringIO("ACGT\n>a\nACGT\n"))

    def test_header_without_id(self):
        with pytest.raises(MalformedHeader):
            read_fasta(io.StringIO(">\nACGT\n"))

    def test_duplicate_id(self):
        with pytest.raises(DuplicateId):
            read_fasta(io.StringIO(">a\nAC\n>a\nGT\n"))

    def test_invalid_base_names_record(self):
        with pytest.raises(InvalidBase) as err:
            read_fasta(io.StringIO(">ok\nACGT\n>bad\nACNT\n"))
        assert err.value.record_id == "bad"
        assert err.value.position == 2

    def test_skip_invalid_drops_offending_records(self):
        text = ">ok\nACGT\n>bad\nACNT\n>ok2\nGGGG\n"
        records = read_fasta(io.StringIO(text), skip_invalid=True)
        assert [r.id for r in records] == ["ok", "ok2"]

    def test_write_read_round_trip(self):
        records = [
            FastaRecord("r1", random_dna(130, seed=1)),
            FastaRecord("r2", random_dna(7, seed=2)),
        ]
        buf = io.StringIO()
        write_fasta(records, buf)
        assert read_fasta(io.StringIO(buf.getvalue())) == records


class TestRandomDna:
    def test_length_and_alphabet(self):
        seq = random_dna(200, seed=77)
        assert len(seq) == 200
        assert set(seq.bases) <= set("ACGT")

    def test_deterministic(self):
        assert random_dna(50, seed=3) == random_dna(50, seed=3)
        assert random_dna(50, seed=3) != random_dna(50, seed=4)

    def test_zero_length(self):
        with pytest.raises(ZeroLength):
            random_dna(0, seed=1)

    def test_roughly_uniform(self):
        seq = random_dna(40000, seed=11)
        for base in "ACGT":
            frac = seq.bases.count(base) / 40000
            assert 0.23 < frac < 0.27


class TestMutateDna:
    def test_rate_validation(self):
        seq = random_dna(10, seed=1)
        with pytest.raises(RateOutOfRange):
            mutate_dna(seq, -0.1, 0.0, seed=1)
        with pytest.raises(RateOutOfRange):
            mutate_dna(seq, 0.0, 1.5, seed=1)

    def test_all_substitutions_flip_every_base(self):
        seq = random_dna(300, seed=5)
        mutated = mutate_dna(seq, 1.0, 0.0, seed=6)
        assert len(mutated) == len(seq)
        assert all(x != y for x, y in zip(seq.bases, mutated.bases))

    def test_zero_indel_preserves_length(self):
        for i in range(20):
            seq = random_dna(60, seed=derive_seed(4, "len", i))
            mutated = mutate_dna(seq, 0.3, 0.0, seed=derive_seed(4, "mut", i))
            assert len(mutated) == 60

    def test_zero_rates_identity(self):
        seq = random_dna(80, seed=9)
        assert mutate_dna(seq, 0.0, 0.0, seed=10) == seq

    def test_deterministic(self):
        seq = random_dna(80, seed=9)
        assert mutate_dna(seq, 0.2, 0.1, seed=42) == mutate_dna(seq, 0.2, 0.1, seed=42)

    def test_empirical_substitution_rate(self):
        # With indels off, positions align; the observed substitution
        # fraction over 10,000 bases should sit near the nominal 0.10.
        seq = random_dna(10000, seed=21)
        mutated = mutate_dna(seq, 0.10, 0.0, seed=22)
        observed = sum(x != y for x, y in zip(seq.bases, mutated.bases)) / 10000
        assert 0.08 <= observed <= 0.12

    def test_empirical_indel_balance(self):
        # Insertions and deletions are equally likely, so the length drift
        # over 10,000 bases stays within a few standard deviations.
        seq = random_dna(10000, seed=31)
        mutated = mutate_dna(seq, 0.0, 0.02, seed=32)
        assert abs(len(mutated) - 10000) <= 70


class TestSeeding:
    def test_frozen_values(self):
        # Regression pins for the derivation, so datasets stay reproducible.
        assert derive_seed(0, "x", 0) == 26599933396135937
        assert derive_seed(1234, "dna-pair/pos", 7) == 16134124334134128334

    def test_distinct_streams(self):
        seeds = {
            derive_seed(7, "a", 0),
            derive_seed(7, "a", 1),
            derive_seed(7, "b", 0),
            derive_seed(8, "a", 0),
        }
        assert len(seeds) == 4

    def test_seed_validation(self):
        with pytest.raises(UsageError):
            derive_seed(-1, "x")
        with pytest.raises(UsageError):
            derive_seed(2**64, "x")

    def test_rng_reproducible(self):
        a = rng_for(5, "stream").integers(0, 1000, size=8)
        b = rng_for(5, "stream").integers(0, 1000, size=8)
        assert list(a) == list(b)
