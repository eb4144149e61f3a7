"""Command-line entry point.

Subcommands: train-lm, train, decode, eval, synth, inspect-model.  Runs
are driven by a key=value config file with flag overrides (flags win), so
an experiment is reproducible from its manifest.  Exit codes: 0 success,
1 usage or config error, 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import channel, corpus, decode_eval, ngram, profiles, training
from .automata import SymbolTable
from .semiring import TropicalWeight

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Everything one experiment needs, mirrored by the config-file keys."""

    language: str = "russian"
    source_alphabet: str = ""
    latin_alphabet: str = ""
    delay: int = 0  # 0: take the profile's value
    lm_corpus: str = ""
    train_corpus: str = ""
    parallel_data: str = ""
    model_dir: str = "models"
    model_out: str = "channel.params"
    seed: int = 0
    restarts: int = 5
    use_prior: int = 1
    prior_files: str = ""  # comma-separated extra mapping files
    batch_size: int = 10
    beta: float = 0.9
    order_schedule: str = "2,3,4,5,6"
    batches_per_stage: int = 100
    prune_threshold_start: float = 5.0
    prune_threshold_end: float = 4.5
    supervised_iterations: int = 5
    init_noise: float = 0.1
    lm_k: float = 10.0
    lm_prune_trigram: float = 1e-5
    lm_prune_higher: float = 2e-5
    workers: int = 1

    def orders(self) -> tuple[int, ...]:
        try:
            orders = tuple(int(x) for x in self.order_schedule.split(","))
        except ValueError as exc:
            raise UsageError(f"bad order_schedule {self.order_schedule!r}") from exc
        if any(o < 2 or o > 6 for o in orders):
            raise UsageError("language model orders must lie in [2, 6]")
        return orders

    def profile(self) -> profiles.LanguageProfile:
        if self.source_alphabet or self.latin_alphabet:
            if not (self.source_alphabet and self.latin_alphabet):
                raise UsageError("custom profiles need both alphabets")
            return profiles.custom_profile(self.source_alphabet, self.latin_alphabet,
                                           self.delay or 1)
        base = profiles.PROFILES.get(self.language)
        if base is None:
            raise UsageError(f"unknown language {self.language!r}; "
                             f"choose from {sorted(profiles.PROFILES)} or set alphabets")
        if self.delay:
            base = dataclasses.replace(base, delay=self.delay)
        return base

    def train_config(self) -> training.TrainConfig:
        return training.TrainConfig(
            batch_size=self.batch_size,
            beta=self.beta,
            order_schedule=self.orders(),
            batches_per_stage=self.batches_per_stage,
            prune_threshold_start=self.prune_threshold_start,
            prune_threshold_end=self.prune_threshold_end,
            delay=self.profile().delay,
            restarts=self.restarts,
            supervised_iterations=self.supervised_iterations,
            init_noise=self.init_noise,
        )


def load_config(path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def build_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    fields = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    if getattr(args, "config", None):
        for key, value in load_config(args.config).items():
            if key not in fields:
                raise UsageError(f"unknown config key {key!r}")
            setattr(cfg, key, _coerce(key, value))
    for key in fields:
        override = getattr(args, key, None)
        if override is not None:
            setattr(cfg, key, override)
    return cfg


def _coerce(key: str, value: str):
    current = getattr(RunConfig(), key)
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def _prior(cfg: RunConfig, profile: profiles.LanguageProfile) -> Optional[channel.PriorSpec]:
    if not cfg.use_prior:
        return None
    paths = list(profile.prior_paths())
    if cfg.prior_files:
        paths.extend(Path(p) for p in cfg.prior_files.split(","))
    if not paths:
        return None
    return channel.load_prior(paths, profile.source_alphabet, profile.latin_alphabet)


def _lm_path(cfg: RunConfig, order: int) -> Path:
    return Path(cfg.model_dir) / f"lm.{order}.txt"


def _load_lm(cfg: RunConfig, order: int) -> ngram.NgramModel:
    path = _lm_path(cfg, order)
    if not path.exists():
        raise DataError(f"missing language model {path}; run train-lm first")
    return ngram.model_from_text(path.read_text(encoding="utf-8"))


def cmd_train_lm(cfg: RunConfig) -> int:
    profile = cfg.profile()
    sentences = corpus.load_corpus(cfg.lm_corpus, "original",
                                   alphabet=profile.source_alphabet)
    if not sentences:
        raise DataError(f"{cfg.lm_corpus}: no sentences survived preprocessing")
    texts = [s.text for s in sentences]
    out_dir = Path(cfg.model_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for order in sorted(set(cfg.orders())):
        counts = ngram.count_ngrams(texts, order)
        model = ngram.witten_bell(counts, k=cfg.lm_k,
                                  alphabet=sorted(profile.source_alphabet))
        if order >= 3:
            theta = cfg.lm_prune_trigram if order == 3 else cfg.lm_prune_higher
            model = ngram.entropy_prune(model, theta)
        path = _lm_path(cfg, order)
        path.write_text(ngram.model_to_text(model), encoding="utf-8")
        print(f"wrote {path} ({model.num_entries()} entries)")
    return 0


def _trace_logger(path: Path):
    fh = open(path, "w", encoding="utf-8")

    def log(record: dict) -> None:
        fh.write(" ".join(f"{k}={v}" for k, v in record.items()) + "\n")
        fh.flush()

    return log, fh


def cmd_train(cfg: RunConfig, mode: str) -> int:
    profile = cfg.profile()
    config = cfg.train_config()
    prior = _prior(cfg, profile)
    out = Path(cfg.model_out)
    out.parent.mkdir(parents=True, exist_ok=True)

    if mode == "unsupervised":
        if not cfg.train_corpus:
            raise UsageError("unsupervised training needs train_corpus")
        sentences = [s.text for s in corpus.load_corpus(
            cfg.train_corpus, "latin", alphabet=profile.latin_alphabet)]
        if not sentences:
            raise DataError(f"{cfg.train_corpus}: no training sentences")
        lms = {order: _load_lm(cfg, order) for order in config.order_schedule}
    else:
        if not cfg.parallel_data:
            raise UsageError("supervised training needs parallel_data")
        raw_pairs = corpus.load_parallel(cfg.parallel_data)
        pairs = [(corpus.restrict_to_alphabet(l, profile.latin_alphabet),
                  corpus.restrict_to_alphabet(o, profile.source_alphabet))
                 for l, o in raw_pairs]
        pairs = [(l, o) for l, o in pairs if l and o]
        if not pairs:
            raise DataError(f"{cfg.parallel_data}: no usable pairs")
        lm = _load_lm(cfg, max(config.order_schedule))

    best = None
    for restart in range(cfg.restarts):
        seed = cfg.seed + restart
        log, fh = _trace_logger(out.with_suffix(out.suffix + f".restart{restart}.log"))
        try:
            if mode == "unsupervised":
                params, trace = training.train_unsupervised(
                    sentences, lms, config, prior, profile, seed=seed, log_fn=log)
            else:
                params, trace = training.train_supervised(
                    pairs, lm, config, prior, profile, seed=seed, log_fn=log)
        finally:
            fh.close()
        criterion = training.final_stage_avg_loglik(trace)
        print(f"restart {restart}: seed={seed} final-stage avg loglik={criterion:.4f}")
        if best is None or criterion > best[0]:
            best = (criterion, restart, params)
    assert best is not None
    criterion, restart, params = best
    out.write_text(channel.params_to_text(params), encoding="utf-8")
    print(f"selected restart {restart} ({criterion:.4f}); wrote {out}")
    return 0


def _build_decoders(cfg: RunConfig):
    profile = cfg.profile()
    params = channel.params_from_text(Path(cfg.model_out).read_text(encoding="utf-8"))
    lm = _load_lm(cfg, max(cfg.orders()))
    source_table = profile.source_table()
    latin_table = profile.latin_table()
    T = ngram.to_wfsa(lm, table=source_table, weight_cls=TropicalWeight)
    S = channel.build_emission_fst(params, channel.DelayLimit(profile.delay),
                                   source_table, latin_table,
                                   weight_cls=TropicalWeight)
    return T, S, latin_table, profile


_WORKER_STATE: dict = {}


def _decode_worker_init(T, S, latin_table):
    _WORKER_STATE["args"] = (T, S, latin_table)


def _decode_worker(sentence: str) -> str:
    T, S, latin_table = _WORKER_STATE["args"]
    try:
        return decode_eval.decode(T, S, sentence, latin_table).source
    except decode_eval.NoPathError:
        return ""


def cmd_decode(cfg: RunConfig, input_path: str, output_path: str) -> int:
    T, S, latin_table, profile = _build_decoders(cfg)
    sentences = [s.text for s in corpus.load_corpus(
        input_path, "latin", alphabet=profile.latin_alphabet)]
    if cfg.workers > 1:
        import multiprocessing

        with multiprocessing.Pool(cfg.workers, initializer=_decode_worker_init,
                                  initargs=(T, S, latin_table)) as pool:
            decoded = pool.map(_decode_worker, sentences)
    else:
        decoded = decode_eval.decode_corpus(T, S, sentences, latin_table)
    Path(output_path).write_text("".join(d + "\n" for d in decoded), encoding="utf-8")
    print(f"decoded {len(decoded)} sentences to {output_path}")
    return 0


def cmd_eval(hyp_path: str, ref_path: str, out_path: Optional[str],
             confusion_path: Optional[str]) -> int:
    hyps = [corpus.preprocess(line, "original")
            for line in Path(hyp_path).read_text(encoding="utf-8").splitlines()]
    refs = [corpus.preprocess(line, "original")
            for line in Path(ref_path).read_text(encoding="utf-8").splitlines()]
    if len(hyps) != len(refs):
        raise DataError(f"line counts differ: {len(hyps)} hypotheses, {len(refs)} references")
    lines = list(decode_eval.report_lines(hyps, refs))
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if confusion_path:
        matrix = decode_eval.confusion(hyps, refs)
        Path(confusion_path).write_text(matrix.to_tsv(), encoding="utf-8")
    return 0


def cmd_synth(corpus_path: str, channel_path: str, n: int,
              out_path: str, gold_path: str) -> int:
    sentences = [s.text for s in corpus.load_corpus(corpus_path, "original")]
    if not sentences:
        raise DataError(f"{corpus_path}: empty corpus")
    chan = corpus.channel_from_file(channel_path)
    latin, gold = corpus.generate_synthetic(sentences, chan, n)
    Path(out_path).write_text("".join(s + "\n" for s in latin), encoding="utf-8")
    Path(gold_path).write_text("".join(s + "\n" for s in gold), encoding="utf-8")
    print(f"generated {n} sentence pairs")
    return 0


def cmd_inspect_model(path: str, top: int = 3) -> int:
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("order\t"):
        model = ngram.model_from_text(text)
        print(f"ngram model: order={model.order} entries={model.num_entries()} "
              f"histories={len(model.histories())} vocab={len(model.vocab)}")
        return 0
    params = channel.params_from_text(text)
    print(f"emission params: {len(params.families)} source characters, "
          f"{len(params.ops)} edit operations, "
          f"insertions {'on' if params.insertions_enabled else 'off'}")
    for s in sorted(params.families):
        fam = params.families[s]
        ranked = sorted(fam.items(), key=lambda kv: -kv[1])[:top]
        shown = ", ".join(
            f"{channel.DELETE_TOKEN if t is None else t}={p:.3f}" for t, p in ranked)
        print(f"  {s} -> {shown}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="deromanize",
                     description="Decipher informally romanized text back "
                                 "into its original script.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--language")
        p.add_argument("--source-alphabet", dest="source_alphabet")
        p.add_argument("--latin-alphabet", dest="latin_alphabet")
        p.add_argument("--delay", type=int)
        p.add_argument("--model-dir", dest="model_dir")
        p.add_argument("--model-out", dest="model_out")
        p.add_argument("--seed", type=int)
        p.add_argument("--restarts", type=int)
        p.add_argument("--use-prior", dest="use_prior", type=int)
        p.add_argument("--prior-files", dest="prior_files")
        p.add_argument("--order-schedule", dest="order_schedule")
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--batches-per-stage", dest="batches_per_stage", type=int)
        p.add_argument("--workers", type=int)

    p = sub.add_parser("train-lm", help="train and prune the n-gram models")
    add_config_args(p)
    p.add_argument("--lm-corpus", dest="lm_corpus")

    p = sub.add_parser("train", help="train the emission channel")
    add_config_args(p)
    p.add_argument("--mode", choices=["unsupervised", "supervised"],
                   default="unsupervised")
    p.add_argument("--train-corpus", dest="train_corpus")
    p.add_argument("--parallel-data", dest="parallel_data")

    p = sub.add_parser("decode", help="decode romanized text")
    add_config_args(p)
    p.add_argument("input")
    p.add_argument("output")

    p = sub.add_parser("eval", help="score hypotheses against references")
    p.add_argument("hyp")
    p.add_argument("ref")
    p.add_argument("--out")
    p.add_argument("--confusion")

    p = sub.add_parser("synth", help="generate synthetic romanized data")
    p.add_argument("corpus")
    p.add_argument("channel")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gold", required=True)

    p = sub.add_parser("inspect-model", help="summarize a model file")
    p.add_argument("model")
    p.add_argument("--top", type=int, default=3)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train-lm":
            return cmd_train_lm(build_run_config(args))
        if args.command == "train":
            return cmd_train(build_run_config(args), args.mode)
        if args.command == "decode":
            return cmd_decode(build_run_config(args), args.input, args.output)
        if args.command == "eval":
            return cmd_eval(args.hyp, args.ref, args.out, args.confusion)
        if args.command == "synth":
            return cmd_synth(args.corpus, args.channel, args.n, args.out, args.gold)
        if args.command == "inspect-model":
            return cmd_inspect_model(args.model, args.top)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except training.TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
