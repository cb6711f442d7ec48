"""Command line front end.

Every subcommand is a thin shell over the library: strict JSON configs
in, atomic artifacts out, one JSON summary line on stdout.  Exit codes
are stable for scripting: 0 success, 1 usage or config mistakes, 2 bad
data, 3 training failures.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .datasetgen import (
    DnaPairConfig,
    DnaProteinConfig,
    PairDataset,
    TaskKind,
    TextPairConfig,
    atomic_write_text,
    gen_dna_pairs,
    gen_dna_protein_pairs,
    gen_text_pairs,
    load_dataset,
    manifest_path,
    read_jsonl,
    save_dataset,
    split_dataset,
    verify_dataset,
)
from .errors import DataError, GenebenchError, TrainingError, UsageError
from .fixtures import cds_fasta_path, english_corpus_path
from .seqcore import read_fasta
from .seeding import check_seed
from .toklab import (
    BpeTokenizer,
    PairEncoding,
    WordPieceTokenizer,
    fit_truncation,
    load_tokenizer,
    save_tokenizer,
    token_stats,
    train_bpe,
)

log = logging.getLogger("genebench")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRAINING = 3


class BadConfigFile(UsageError):
    """A config file that is unreadable, has unknown keys, or wrong types."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags, which collides with the
    # data-error code; funnel everything through UsageError instead
    def error(self, message):
        raise UsageError(message)


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        payload = {"level": record.levelname.lower(), "message": record.getMessage()}
        return json.dumps(payload, sort_keys=True)


def _setup_logging(json_logs: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(_JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO)
    log.propagate = False


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as stream:
            stream.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as stream:
            loaded = json.load(stream)
    except OSError as exc:
        raise BadConfigFile(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise BadConfigFile(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(loaded, dict):
        raise BadConfigFile(f"config {path} must be a JSON object")
    return loaded


def check_keys(cfg: dict, schema: dict, required, context: str) -> None:
    """Strict schema check: unknown keys, missing keys, and wrong JSON
    types all fail fast with the offending key named."""
    for key in cfg:
        if key not in schema:
            raise BadConfigFile(f"{context}: unknown key {key!r}")
    for key in required:
        if key not in cfg:
            raise BadConfigFile(f"{context}: missing required key {key!r}")
    for key, value in cfg.items():
        expected = schema[key]
        if value is None and type(None) in _as_tuple(expected):
            continue
        if isinstance(value, bool) and bool not in _as_tuple(expected):
            raise BadConfigFile(f"{context}: key {key!r} must not be a boolean")
        if expected is float:
            if not isinstance(value, (int, float)):
                raise BadConfigFile(f"{context}: key {key!r} must be a number")
            continue
        if not isinstance(value, _as_tuple(expected)):
            names = "/".join(t.__name__ for t in _as_tuple(expected))
            raise BadConfigFile(f"{context}: key {key!r} must be {names}")


def _as_tuple(expected):
    return expected if isinstance(expected, tuple) else (expected,)


_SCHEME_SCHEMA = {"match": int, "mismatch": int, "gap_open": int, "gap_extend": int}
_HOMOLOGY_SCHEMA = {
    "scheme": dict,
    "lambda": float,
    "karlin_k": float,
    "evalue_threshold": float,
    "negative_min_evalue": float,
    "negative_max_identity": float,
}
_DNA_PAIR_SCHEMA = {
    "task": str,
    "n": int,
    "seq_len": int,
    "sub_rate": float,
    "indel_rate": float,
    "length_tolerance": float,
    "homology": dict,
    "max_retries": int,
    "seed": int,
}
_DNA_PROTEIN_SCHEMA = {
    "task": str,
    "n": int,
    "dna_len_cap": (int, type(None)),
    "max_retries": int,
    "seed": int,
}
_TEXT_PAIR_SCHEMA = {
    "task": str,
    "n": int,
    "noise": float,
    "max_retries": int,
    "seed": int,
}
_MODEL_SCHEMA = {
    "d_model": int,
    "n_layers": int,
    "n_heads": int,
    "d_ff": int,
    "max_seq_len": int,
    "dropout": float,
}
_TRAIN_SCHEMA = {
    "learning_rate": float,
    "batch_size": int,
    "max_steps": int,
    "beta1": float,
    "beta2": float,
    "weight_decay": float,
    "mask_rate": float,
}
_CORPUS_SCHEMA = {"path": str, "weight": float, "format": str}
_PRETRAIN_SCHEMA = {
    "arch": str,
    "model": dict,
    "train": dict,
    "corpora": list,
    "seed": int,
}
_FINETUNE_SCHEMA = {
    "encoding": str,
    "train": dict,
    "arch": str,
    "model": dict,
    "max_len": int,
    "seed": int,
}
_GRID_SCHEMA = {"alpha": float, "rows": list, "columns": list}
_GRID_ROW_SCHEMA = {
    "name": str,
    "checkpoint": str,
    "tokenizer": str,
    "encoding": str,
    "batch_size": int,
    "max_len": int,
}
_GRID_COLUMN_SCHEMA = {"name": str, "path": str}


def _merge_defaults(defaults: dict, overrides: dict) -> dict:
    """Overlay a partial config onto full defaults, recursing into
    nested objects so sub-configs may also be partial."""
    merged = dict(defaults)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge_defaults(merged[key], value)
        else:
            merged[key] = value
    return merged


def _check_generator_config(cfg: dict, schema: dict, task: TaskKind, context: str):
    check_keys(cfg, schema, {"n"}, context)
    if "task" in cfg and cfg["task"] != task.value:
        raise BadConfigFile(
            f"{context}: task {cfg['task']!r} does not match this command"
        )
    if "homology" in cfg:
        check_keys(cfg["homology"], _HOMOLOGY_SCHEMA, set(), f"{context}.homology")
        if "scheme" in cfg["homology"]:
            check_keys(
                cfg["homology"]["scheme"], _SCHEME_SCHEMA, set(), f"{context}.homology.scheme"
            )


def _apply_seed_override(cfg: dict, args) -> dict:
    if args.seed is not None:
        cfg = dict(cfg)
        cfg["seed"] = args.seed
    return cfg


def _sha256_file(path) -> str:
    import hashlib

    digest = hashlib.sha256()
    with open(path, "rb") as stream:
        for block in iter(lambda: stream.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_run_manifest(
    out_path, command: str, resolved: dict, inputs=(), outputs=(), started=None
) -> None:
    """Record what the run resolved to and what it touched.

    Written after all outputs, so the output digests describe the final
    artifacts; rerunning with the resolved config must reproduce them.
    """
    from .datasetgen import config_digest

    manifest = {
        "command": command,
        "package_version": __version__,
        "resolved_config": resolved,
        "resolved_config_digest": config_digest(resolved),
        "input_digests": {os.fspath(p): _sha256_file(p) for p in inputs},
        "output_digests": {os.fspath(p): _sha256_file(p) for p in outputs},
        "duration_seconds": None if started is None else round(time.monotonic() - started, 3),
    }
    atomic_write_text(
        os.fspath(out_path) + ".run.json",
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")


def _read_fasta_records(path):
    try:
        with open(path, encoding="utf-8") as stream:
            return read_fasta(stream)
    except OSError as exc:
        raise DataError(f"cannot read FASTA {path}: {exc}") from None


def _read_lines(path) -> list:
    try:
        with open(path, encoding="utf-8") as stream:
            return [line.rstrip("\n") for line in stream if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _read_corpus(path, fasta: bool) -> list:
    if fasta:
        return [str(record.seq) for record in _read_fasta_records(path)]
    return _read_lines(path)


def _load_tokenizer_file(path):
    try:
        with open(path, encoding="utf-8") as stream:
            return load_tokenizer(stream)
    except OSError as exc:
        raise DataError(f"cannot read tokenizer {path}: {exc}") from None


def _save_tokenizer_atomic(tokenizer, path) -> None:
    buffer = io.StringIO()
    save_tokenizer(tokenizer, buffer)
    atomic_write_text(path, buffer.getvalue())


def _save_checkpoint_atomic(model, path) -> None:
    from .model import save_checkpoint

    buffer = io.BytesIO()
    save_checkpoint(model, buffer)
    atomic_write_bytes(path, buffer.getvalue())


def _load_checkpoint_file(path):
    from .model import load_checkpoint

    try:
        with open(path, "rb") as stream:
            return load_checkpoint(stream)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from None


def _read_records(path) -> list:
    try:
        with open(path, encoding="utf-8") as stream:
            return read_jsonl(stream).records
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None


def _load_dataset_file(path) -> PairDataset:
    try:
        return load_dataset(path)
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None


def _pair_encoding(name: str) -> PairEncoding:
    try:
        return PairEncoding(name)
    except ValueError:
        valid = ", ".join(sorted(e.value for e in PairEncoding))
        raise BadConfigFile(f"unknown encoding {name!r} (expected one of: {valid})") from None


def _losses_csv(losses) -> str:
    lines = ["step,loss"]
    lines.extend(f"{step},{value!r}" for step, value in enumerate(losses))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# dataset generation commands


def _generator_raw(args, schema: dict, task: TaskKind, context: str, flag_keys) -> dict:
    """Resolve a generator config from defaults, config file, then flags.

    The config file is optional; every flat key has a flag mirror, so
    `--n 100 --seed 7` alone is a valid run.  The merged result is
    schema-checked once so bad config-file keys and bad flag values fail
    identically.
    """
    raw = load_json_config(args.config) if args.config else {}
    for key in flag_keys:
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    homology = getattr(args, "homology", None)
    if homology is not None:
        try:
            raw["homology"] = json.loads(homology)
        except json.JSONDecodeError as exc:
            raise BadConfigFile(f"--homology is not valid JSON: {exc}") from None
    raw = _apply_seed_override(raw, args)
    if "n" not in raw:
        raise BadConfigFile(f"{context}: key 'n' is required (config file or --n)")
    _check_generator_config(raw, schema, task, context)
    return raw


def _finish_generation(args, command: str, dataset: PairDataset, cfg, sources_path, started):
    save_dataset(dataset, args.out)
    _write_run_manifest(
        args.out,
        command,
        cfg.to_dict(),
        inputs=[sources_path],
        outputs=[args.out, manifest_path(args.out)],
        started=started,
    )
    log.info("wrote %d pairs to %s", len(dataset.records), args.out)
    _emit({"out": os.fspath(args.out), "n": len(dataset.records)})
    return EXIT_OK


def cmd_gen_dna_pairs(args) -> int:
    started = time.monotonic()
    raw = _generator_raw(
        args,
        _DNA_PAIR_SCHEMA,
        TaskKind.DNA_PAIR,
        "gen-dna-pairs config",
        ("n", "seq_len", "sub_rate", "indel_rate", "length_tolerance", "max_retries"),
    )
    cfg = DnaPairConfig.from_dict(_merge_defaults(DnaPairConfig(n=raw["n"]).to_dict(), raw))
    sources_path = args.sources or cds_fasta_path()
    dataset = gen_dna_pairs(_read_fasta_records(sources_path), cfg)
    return _finish_generation(args, "gen-dna-pairs", dataset, cfg, sources_path, started)


def cmd_gen_dna_protein_pairs(args) -> int:
    started = time.monotonic()
    raw = _generator_raw(
        args,
        _DNA_PROTEIN_SCHEMA,
        TaskKind.DNA_PROTEIN_PAIR,
        "gen-dna-protein-pairs config",
        ("n", "dna_len_cap", "max_retries"),
    )
    cfg = DnaProteinConfig.from_dict(_merge_defaults(DnaProteinConfig(n=raw["n"]).to_dict(), raw))
    sources_path = args.sources or cds_fasta_path()
    dataset = gen_dna_protein_pairs(_read_fasta_records(sources_path), cfg)
    return _finish_generation(args, "gen-dna-protein-pairs", dataset, cfg, sources_path, started)


def cmd_gen_text_pairs(args) -> int:
    started = time.monotonic()
    raw = _generator_raw(
        args,
        _TEXT_PAIR_SCHEMA,
        TaskKind.TEXT_PAIR,
        "gen-text-pairs config",
        ("n", "noise", "max_retries"),
    )
    cfg = TextPairConfig.from_dict(_merge_defaults(TextPairConfig(n=raw["n"]).to_dict(), raw))
    corpus_path = args.corpus or english_corpus_path()
    dataset = gen_text_pairs(_read_lines(corpus_path), cfg)
    return _finish_generation(args, "gen-text-pairs", dataset, cfg, corpus_path, started)


def cmd_split_dataset(args) -> int:
    dataset = _load_dataset_file(args.data)
    try:
        fractions = [float(f) for f in args.fractions.split(",")]
    except ValueError:
        raise UsageError(f"--fractions must be comma-separated numbers, got {args.fractions!r}") from None
    seed = args.seed if args.seed is not None else 0
    parts = split_dataset(dataset, fractions, seed=seed)
    outs = args.out
    if len(outs) != len(parts):
        raise UsageError(f"{len(fractions)} fractions but {len(outs)} --out paths")
    for part, out in zip(parts, outs):
        save_dataset(part, out)
    _emit({"parts": [{"out": os.fspath(o), "n": len(p.records)} for p, o in zip(parts, outs)]})
    return EXIT_OK


def cmd_verify_dataset(args) -> int:
    dataset = _load_dataset_file(args.data)
    report = verify_dataset(dataset)
    payload = {
        "task": report.task.value,
        "n": report.n,
        "ok": report.ok,
        "issues": [{"line": line, "problem": message} for line, message in report.issues],
    }
    _emit(payload)
    if not report.ok:
        log.error("%d issue(s) found in %s", len(report.issues), args.data)
        return EXIT_DATA
    log.info("%s verified clean (%d records)", args.data, report.n)
    return EXIT_OK


# ---------------------------------------------------------------------------
# tokenizer commands


def cmd_train_tokenizer(args) -> int:
    started = time.monotonic()
    corpus = []
    corpus_paths = list(args.corpus or [english_corpus_path()])
    for path in corpus_paths:
        corpus.extend(_read_corpus(path, args.fasta))
    if args.max_lines is not None:
        corpus = corpus[: args.max_lines]
    tokenizer = train_bpe(corpus, vocab_size=args.vocab_size)
    if args.kind == "wordpiece":
        tokenizer = WordPieceTokenizer.from_bpe(tokenizer)
    _save_tokenizer_atomic(tokenizer, args.out)
    _write_run_manifest(
        args.out,
        "train-tokenizer",
        {"kind": args.kind, "vocab_size": args.vocab_size, "n_lines": len(corpus)},
        inputs=corpus_paths,
        outputs=[args.out],
        started=started,
    )
    log.info("trained %s tokenizer on %d lines", args.kind, len(corpus))
    _emit({"out": os.fspath(args.out), "model_vocab_size": tokenizer.model_vocab_size})
    return EXIT_OK


def cmd_token_stats(args) -> int:
    tokenizer = _load_tokenizer_file(args.tokenizer)
    corpus = _read_corpus(args.corpus or english_corpus_path(), args.fasta)
    stats = token_stats(tokenizer, corpus)
    payload = stats.to_dict()
    if args.out:
        atomic_write_text(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _emit(payload)
    return EXIT_OK


def cmd_fit_truncation(args) -> int:
    tokenizer = _load_tokenizer_file(args.tokenizer)
    corpus = _read_corpus(args.corpus or english_corpus_path(), args.fasta)
    stats = token_stats(tokenizer, corpus)
    truncation = fit_truncation(args.target_tokens, stats)
    _emit(
        {
            "target_tokens": args.target_tokens,
            "chars_per_token": stats.chars_per_token,
            "truncation": truncation,
        }
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# model commands


def _model_dtype(args):
    import torch

    return torch.float32 if args.precision == "f32" else torch.float64


def _apply_train_overrides(train_raw: dict, args) -> dict:
    merged = dict(train_raw)
    for key in ("max_steps", "learning_rate", "batch_size"):
        value = getattr(args, key)
        if value is not None:
            merged[key] = value
    return merged


def _resolve_seed(cfg: dict, args) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    check_seed(seed)
    return seed


def cmd_pretrain(args) -> int:
    from .model import (
        Arch,
        LmData,
        ModelConfig,
        Objective,
        TrainConfig,
        chunk_length_for,
        init_params,
        lm_chunks,
        train,
    )

    started = time.monotonic()
    raw = load_json_config(args.config)
    check_keys(raw, _PRETRAIN_SCHEMA, {"arch", "model", "train", "corpora"}, "pretrain config")
    check_keys(raw["model"], _MODEL_SCHEMA, set(), "pretrain config.model")
    check_keys(raw["train"], _TRAIN_SCHEMA, set(), "pretrain config.train")
    raw["train"] = _apply_train_overrides(raw["train"], args)
    for i, corpus in enumerate(raw["corpora"]):
        if not isinstance(corpus, dict):
            raise BadConfigFile(f"pretrain config.corpora[{i}] must be an object")
        check_keys(corpus, _CORPUS_SCHEMA, {"path"}, f"pretrain config.corpora[{i}]")
        if corpus.get("format", "lines") not in ("lines", "fasta"):
            raise BadConfigFile(
                f"pretrain config.corpora[{i}]: format must be 'lines' or 'fasta'"
            )
    if not raw["corpora"]:
        raise BadConfigFile("pretrain config: corpora must not be empty")
    try:
        arch = Arch(raw["arch"])
    except ValueError:
        raise BadConfigFile(f"pretrain config: unknown arch {raw['arch']!r}") from None
    seed = _resolve_seed(raw, args)
    tokenizer = _load_tokenizer_file(args.tokenizer)
    model_cfg = ModelConfig(arch=arch, vocab_size=tokenizer.model_vocab_size, **raw["model"])
    train_cfg = TrainConfig(seed=seed, **raw["train"])
    if args.init_from:
        model = _load_checkpoint_file(args.init_from)
        if model.cfg != model_cfg:
            raise DataError("--init-from checkpoint does not match the configured model")
    else:
        model = init_params(model_cfg, seed=seed, dtype=_model_dtype(args))
    chunk_len = chunk_length_for(model)
    chunk_sets = []
    weights = []
    for corpus in raw["corpora"]:
        texts = _read_corpus(corpus["path"], corpus.get("format", "lines") == "fasta")
        chunk_sets.append(lm_chunks(tokenizer, texts, chunk_len))
        weights.append(float(corpus.get("weight", 1.0)))
    mask_id = tokenizer.unk_id if arch is Arch.ENCODER_BIDIR else None
    log.info(
        "pretraining %s on %d corpora for %d steps",
        arch.value,
        len(chunk_sets),
        train_cfg.max_steps,
    )
    result = train(model, LmData(chunk_sets, weights, mask_id=mask_id), train_cfg, Objective.LM)
    _save_checkpoint_atomic(result.model, args.out)
    atomic_write_text(os.fspath(args.out) + ".losses.csv", _losses_csv(result.losses))
    resolved = {
        "arch": arch.value,
        "model": model_cfg.to_dict(),
        "train": asdict(train_cfg),
        "corpora": raw["corpora"],
        "seed": seed,
    }
    inputs = [args.tokenizer] + [c["path"] for c in raw["corpora"]]
    if args.init_from:
        inputs.append(args.init_from)
    _write_run_manifest(
        args.out,
        "pretrain",
        resolved,
        inputs=inputs,
        outputs=[args.out, os.fspath(args.out) + ".losses.csv"],
        started=started,
    )
    _emit(
        {
            "out": os.fspath(args.out),
            "steps": len(result.losses),
            "final_loss": result.losses[-1],
        }
    )
    return EXIT_OK


def cmd_extend_vocab(args) -> int:
    from .model import extend_vocab

    started = time.monotonic()
    model = _load_checkpoint_file(args.checkpoint)
    tokenizer = _load_tokenizer_file(args.tokenizer)
    if not isinstance(tokenizer, BpeTokenizer):
        raise DataError("extend-vocab needs a BPE tokenizer")
    if args.tokens:
        new_tokens = [t for t in args.tokens.split(",") if t]
    elif args.tokens_file:
        new_tokens = _read_lines(args.tokens_file)
    else:
        raise UsageError("pass --tokens or --tokens-file")
    seed = args.seed if args.seed is not None else 0
    check_seed(seed)
    new_model, new_tokenizer = extend_vocab(model, tokenizer, new_tokens, seed=seed)
    _save_checkpoint_atomic(new_model, args.out_checkpoint)
    _save_tokenizer_atomic(new_tokenizer, args.out_tokenizer)
    inputs = [args.checkpoint, args.tokenizer]
    if args.tokens_file and not args.tokens:
        inputs.append(args.tokens_file)
    _write_run_manifest(
        args.out_checkpoint,
        "extend-vocab",
        {"new_tokens": new_tokens, "seed": seed, "vocab_size": new_model.cfg.vocab_size},
        inputs=inputs,
        outputs=[args.out_checkpoint, args.out_tokenizer],
        started=started,
    )
    log.info("added %d tokens; vocab is now %d", len(new_tokens), new_model.cfg.vocab_size)
    _emit(
        {
            "out_checkpoint": os.fspath(args.out_checkpoint),
            "out_tokenizer": os.fspath(args.out_tokenizer),
            "model_vocab_size": new_model.cfg.vocab_size,
        }
    )
    return EXIT_OK


def _encode_records(tokenizer, records, mode, max_len):
    from .toklab import encode_pair

    ids = np.asarray(
        [encode_pair(tokenizer, record, mode, max_len) for record in records],
        dtype=np.int64,
    )
    labels = np.asarray([record.label for record in records], dtype=np.int64)
    return ids, labels


def cmd_finetune(args) -> int:
    from .model import (
        Arch,
        ClassifyData,
        ModelConfig,
        Objective,
        TrainConfig,
        init_params,
        train,
    )

    started = time.monotonic()
    raw = load_json_config(args.config)
    check_keys(raw, _FINETUNE_SCHEMA, {"encoding", "train"}, "finetune config")
    check_keys(raw["train"], _TRAIN_SCHEMA, set(), "finetune config.train")
    raw["train"] = _apply_train_overrides(raw["train"], args)
    mode = _pair_encoding(raw["encoding"])
    seed = _resolve_seed(raw, args)
    tokenizer = _load_tokenizer_file(args.tokenizer)
    if args.checkpoint:
        model = _load_checkpoint_file(args.checkpoint)
    else:
        if "arch" not in raw or "model" not in raw:
            raise BadConfigFile(
                "finetune config: without --checkpoint, 'arch' and 'model' are required"
            )
        check_keys(raw["model"], _MODEL_SCHEMA, set(), "finetune config.model")
        try:
            arch = Arch(raw["arch"])
        except ValueError:
            raise BadConfigFile(f"finetune config: unknown arch {raw['arch']!r}") from None
        model_cfg = ModelConfig(
            arch=arch, vocab_size=tokenizer.model_vocab_size, **raw["model"]
        )
        model = init_params(model_cfg, seed=seed, dtype=_model_dtype(args))
    max_len = raw.get("max_len", model.cfg.max_seq_len)
    records = _read_records(args.data)
    ids, labels = _encode_records(tokenizer, records, mode, max_len)
    train_cfg = TrainConfig(seed=seed, **raw["train"])
    log.info("finetuning on %d pairs for %d steps", len(records), train_cfg.max_steps)
    result = train(
        model, ClassifyData(ids, labels, tokenizer.pad_id), train_cfg, Objective.CLASSIFY
    )
    _save_checkpoint_atomic(result.model, args.out)
    atomic_write_text(os.fspath(args.out) + ".losses.csv", _losses_csv(result.losses))
    resolved = {
        "encoding": mode.value,
        "model": result.model.cfg.to_dict(),
        "train": asdict(train_cfg),
        "max_len": max_len,
        "seed": seed,
    }
    inputs = [args.tokenizer, args.data]
    if args.checkpoint:
        inputs.append(args.checkpoint)
    _write_run_manifest(
        args.out,
        "finetune",
        resolved,
        inputs=inputs,
        outputs=[args.out, os.fspath(args.out) + ".losses.csv"],
        started=started,
    )
    _emit(
        {
            "out": os.fspath(args.out),
            "steps": len(result.losses),
            "final_loss": result.losses[-1],
        }
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evalharness import evaluate_predictions, model_predictor

    model = _load_checkpoint_file(args.checkpoint)
    tokenizer = _load_tokenizer_file(args.tokenizer)
    mode = _pair_encoding(args.encoding)
    records = _read_records(args.data)
    predictor = model_predictor(
        model, tokenizer, mode, batch_size=args.batch_size
    )
    predictions = predictor(records)
    report = evaluate_predictions(predictions, [r.label for r in records], alpha=args.alpha)
    payload = report.to_dict()
    if args.out:
        atomic_write_text(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _emit(payload)
    return EXIT_OK


def cmd_grid(args) -> int:
    from .evalharness import GridColumn, GridRow, model_predictor, render_csv, render_text, run_grid

    raw = load_json_config(args.config)
    check_keys(raw, _GRID_SCHEMA, {"rows", "columns"}, "grid config")
    alpha = float(raw.get("alpha", 0.05))
    rows = []
    for i, row in enumerate(raw["rows"]):
        if not isinstance(row, dict):
            raise BadConfigFile(f"grid config.rows[{i}] must be an object")
        check_keys(
            row,
            _GRID_ROW_SCHEMA,
            {"name", "checkpoint", "tokenizer", "encoding"},
            f"grid config.rows[{i}]",
        )
        mode = _pair_encoding(row["encoding"])

        def prepare(row=row, mode=mode):
            model = _load_checkpoint_file(row["checkpoint"])
            tokenizer = _load_tokenizer_file(row["tokenizer"])
            return model_predictor(
                model,
                tokenizer,
                mode,
                batch_size=row.get("batch_size", 64),
            )

        rows.append(GridRow(row["name"], prepare))
    columns = []
    for i, column in enumerate(raw["columns"]):
        if not isinstance(column, dict):
            raise BadConfigFile(f"grid config.columns[{i}] must be an object")
        check_keys(column, _GRID_COLUMN_SCHEMA, {"name", "path"}, f"grid config.columns[{i}]")
        columns.append(GridColumn(column["name"], _read_records(column["path"])))
    result = run_grid(rows, columns, alpha=alpha)
    text = render_text(result)
    sys.stdout.write(text)
    if args.out:
        atomic_write_text(args.out, text)
    if args.csv:
        atomic_write_text(args.csv, render_csv(result))
    failed = [cell for cell in result.cells if cell.error is not None]
    for cell in failed:
        log.error("cell %s/%s failed: %s", cell.row, cell.column, cell.error)
    if failed and args.strict:
        return EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="genebench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"genebench {__version__}")
    parser.add_argument("--seed", type=int, default=None, help="override config seeds")
    parser.add_argument(
        "--precision",
        choices=("f64", "f32"),
        default="f64",
        help="dtype for newly initialized models",
    )
    parser.add_argument("--threads", type=int, default=None, help="torch thread count")
    parser.add_argument(
        "--json-logs", action="store_true", help="machine-readable logs on stderr"
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("gen-dna-pairs", help="alignment-verified DNA pair dataset")
    p.add_argument("--config", default=None, help="JSON config; flags override its keys")
    p.add_argument("--sources", default=None, help="FASTA of source sequences")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seq-len", type=int, default=None)
    p.add_argument("--sub-rate", type=float, default=None)
    p.add_argument("--indel-rate", type=float, default=None)
    p.add_argument("--length-tolerance", type=float, default=None)
    p.add_argument("--max-retries", type=int, default=None)
    p.add_argument("--homology", default=None, help="inline JSON homology settings")
    p.set_defaults(func=cmd_gen_dna_pairs)

    p = sub.add_parser("gen-dna-protein-pairs", help="CDS/protein pair dataset")
    p.add_argument("--config", default=None, help="JSON config; flags override its keys")
    p.add_argument("--sources", default=None, help="FASTA of coding sequences")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dna-len-cap", type=int, default=None)
    p.add_argument("--max-retries", type=int, default=None)
    p.set_defaults(func=cmd_gen_dna_protein_pairs)

    p = sub.add_parser("gen-text-pairs", help="text sentence pair dataset")
    p.add_argument("--config", default=None, help="JSON config; flags override its keys")
    p.add_argument("--corpus", default=None, help="one sentence per line")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--max-retries", type=int, default=None)
    p.set_defaults(func=cmd_gen_text_pairs)

    p = sub.add_parser("split-dataset", help="stratified train/dev/test split")
    p.add_argument("--data", required=True)
    p.add_argument("--fractions", required=True, help="comma-separated, e.g. 0.8,0.1,0.1")
    p.add_argument("--out", nargs="+", required=True, help="one path per fraction")
    p.set_defaults(func=cmd_split_dataset)

    p = sub.add_parser("verify-dataset", help="re-derive labels and report issues")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_verify_dataset)

    p = sub.add_parser("train-tokenizer", help="train BPE (or derive WordPiece)")
    p.add_argument("--kind", choices=("bpe", "wordpiece"), default="bpe")
    p.add_argument("--corpus", nargs="+", default=None)
    p.add_argument("--fasta", action="store_true", help="corpus files are FASTA")
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--max-lines", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_tokenizer)

    p = sub.add_parser("token-stats", help="token budget of a corpus")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--corpus", default=None)
    p.add_argument("--fasta", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_token_stats)

    p = sub.add_parser("fit-truncation", help="char budget for a token target")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--corpus", default=None)
    p.add_argument("--fasta", action="store_true")
    p.add_argument("--target-tokens", type=int, required=True)
    p.set_defaults(func=cmd_fit_truncation)

    p = sub.add_parser("pretrain", help="language-model pretraining")
    p.add_argument("--config", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--init-from", default=None, help="continue from a checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("extend-vocab", help="grow tokenizer and model vocabulary")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--tokens", default=None, help="comma-separated new tokens")
    p.add_argument("--tokens-file", default=None, help="one token per line")
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-tokenizer", required=True)
    p.set_defaults(func=cmd_extend_vocab)

    p = sub.add_parser("finetune", help="pair classification training")
    p.add_argument("--config", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", default=None, help="start from a checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--encoding", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="evaluate a table of runs against test sets")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="also write the text table here")
    p.add_argument("--csv", default=None, help="write the CSV form here")
    p.add_argument("--strict", action="store_true", help="exit 2 if any cell failed")
    p.set_defaults(func=cmd_grid)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _setup_logging(getattr(args, "json_logs", False))
        if args.command is None:
            raise UsageError("no command given (see --help)")
        if args.seed is not None:
            check_seed(args.seed)
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError(f"--threads must be >= 1, got {args.threads}")
            import torch

            torch.set_num_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        _report_error(exc)
        return EXIT_USAGE
    except TrainingError as exc:
        _report_error(exc)
        return EXIT_TRAINING
    except GenebenchError as exc:
        _report_error(exc)
        return EXIT_DATA


def _report_error(exc: Exception) -> None:
    if log.handlers:
        log.error("%s", exc)
    else:
        sys.stderr.write(f"error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
