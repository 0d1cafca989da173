"""Command-line interface.

Subcommands: synth, train, eval, recommend, verify, sweep. Exit codes:
0 success, 1 usage/contract error, 2 verification or acceptance failure,
3 I/O error. Every randomized command prints its resolved seed; CLI flags
override config-file values.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import checkpoint as ckpt
from .cluster import svd_user_embeddings
from .config import load_config, merged
from .data import ingest, split
from .errors import ContractError, IngestError, NumericError
from .model import Model, ModelConfig
from .sampler import SamplerConfig, sample
from .schedule import ScheduleParams
from .trainer import SyntheticSpec, TrainConfig, evaluate, fit, generate_synthetic_file


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors → exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_common(p: _Parser):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, default=None)


def _add_schedule(p: _Parser):
    p.add_argument("--schedule", choices=["gmax", "vp"], default=None)
    p.add_argument("--beta0", type=float, default=None)
    p.add_argument("--beta1", type=float, default=None)


def _add_sampler(p: _Parser):
    p.add_argument("--mode", choices=["sde", "ode"], default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--guidance-w", type=float, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="bridgerec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--items", type=int, required=True)
    p.add_argument("--pattern", choices=["markov", "block-cyclic"],
                   default="block-cyclic")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--min-len", type=int, default=12)
    p.add_argument("--max-len", type=int, default=20)
    p.add_argument("--zipf", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a model on a dataset file")
    _add_common(p)
    _add_schedule(p)
    _add_sampler(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--blocks", type=int, default=None, dest="enc_blocks",
                   help="encoder block count")
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--k-clusters", type=int, default=None)
    p.add_argument("--cond-drop-p", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--lambda", type=float, default=None, dest="lam")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--target-hr1", type=float, default=None)
    p.add_argument("--con-mode", action="store_true", default=None)
    p.add_argument("--user-emb", default=None,
                   help="static user embedding file (header: num_users dim); "
                        "omit to fall back to SVD of the train matrix")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p)
    _add_sampler(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--which", choices=["valid", "test"], default="test")
    p.add_argument("--steps-sweep", default=None,
                   help="comma-separated step counts; writes steps,hr10 CSV")
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")

    p = sub.add_parser("recommend", help="top-K recommendations for a history")
    _add_common(p)
    _add_sampler(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--history", default="-",
                   help="space-separated item ids; file path or '-' for stdin")
    p.add_argument("-k", "--top-k", type=int, default=10)

    p = sub.add_parser("verify", help="run the oracle/property suite")
    _add_common(p)

    p = sub.add_parser("sweep", help="schedule/sampler grid, one training per cell")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--kinds", default="gmax,vp")
    p.add_argument("--modes", default="sde,ode")
    p.add_argument("--beta1s", default="10,20")
    p.add_argument("--beta0", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")
    return parser


def _resolved(file_values, args, key, flag_value, default):
    if flag_value is not None:
        return flag_value
    if key in file_values:
        return file_values[key]
    return default


def _load_file_values(args) -> dict:
    return load_config(args.config) if getattr(args, "config", None) else {}


def _schedule_from(args, fv) -> ScheduleParams:
    return ScheduleParams(
        kind=_resolved(fv, args, "schedule.kind", getattr(args, "schedule", None), "gmax"),
        beta0=_resolved(fv, args, "schedule.beta0", getattr(args, "beta0", None), 0.01),
        beta1=_resolved(fv, args, "schedule.beta1", getattr(args, "beta1", None), 10.0),
    )


def _sampler_from(args, fv, seed) -> SamplerConfig:
    return SamplerConfig(
        mode=_resolved(fv, args, "sampler.mode", getattr(args, "mode", None), "ode"),
        steps=_resolved(fv, args, "sampler.steps", getattr(args, "steps", None), 12),
        guidance_w=_resolved(fv, args, "sampler.guidance_w",
                             getattr(args, "guidance_w", None), 0.8),
        seed=seed,
    )


def _seed_from(args, fv) -> int:
    seed = _resolved(fv, args, "train.seed", getattr(args, "seed", None), 0)
    print(f"seed: {seed}")
    return seed


def cmd_synth(args) -> int:
    fv = _load_file_values(args)
    seed = _seed_from(args, fv)
    spec = SyntheticSpec(num_users=args.users, num_items=args.items,
                         pattern=args.pattern, noise_rate=args.noise,
                         seed=seed, blocks=args.blocks,
                         min_len=args.min_len, max_len=args.max_len,
                         zipf=args.zipf)
    n = generate_synthetic_file(spec, args.out)
    print(f"wrote {n} users to {args.out}")
    return 0


def cmd_train(args) -> int:
    fv = _load_file_values(args)
    seed = _seed_from(args, fv)
    dataset = ingest(args.data)
    schedule_params = _schedule_from(args, fv)
    sampler_config = _sampler_from(args, fv, seed)
    model_config = ModelConfig(
        vocab=dataset.num_items,
        dim=_resolved(fv, args, "model.dim", args.dim, 128),
        blocks=_resolved(fv, args, "model.blocks", args.enc_blocks, 4),
        max_len=_resolved(fv, args, "model.max_len", args.max_len, 50),
        dropout=_resolved(fv, args, "model.dropout", args.dropout, 0.2),
        k_clusters=_resolved(fv, args, "model.k_clusters", args.k_clusters, 0),
        mu=_resolved(fv, args, "model.mu", args.mu, 1.0),
        sigma=_resolved(fv, args, "model.sigma", args.sigma, 0.1),
        lam=_resolved(fv, args, "model.lambda", args.lam, 100.0),
    )
    con_mode = bool(_resolved(fv, args, "train.con_mode", args.con_mode, False))
    if con_mode and model_config.k_clusters == 0:
        model_config = dataclasses.replace(model_config, k_clusters=2)
    train_config = TrainConfig(
        lr=_resolved(fv, args, "train.lr", args.lr, 0.001),
        batch_size=_resolved(fv, args, "train.batch", args.batch, 256),
        epochs=_resolved(fv, args, "train.epochs", args.epochs, 100),
        cond_drop_p=_resolved(fv, args, "train.cond_drop_p", args.cond_drop_p, 0.1),
        seed=seed,
        con_mode=con_mode,
        patience=_resolved(fv, args, "train.patience", args.patience, 20),
        eval_every=_resolved(fv, args, "train.eval_every", args.eval_every, 1),
        target_hr1=_resolved(fv, args, "train.target_hr1", args.target_hr1, None),
    )
    user_vectors = None
    if args.user_emb:
        from .cluster import load_user_embeddings
        user_vectors = load_user_embeddings(args.user_emb).aligned(dataset.user_ids)
    log = None if args.quiet else print
    result = fit(dataset, model_config, schedule_params, sampler_config,
                 train_config, user_vectors=user_vectors, log=log)
    ckpt.save(args.out, result.model, schedule_params, sampler_config,
              cluster=result.cluster)
    print(f"best epoch {result.best_epoch}  val hr@10 {result.best_hr10:.2f}  "
          f"({result.seconds:.1f} s)")
    if result.stopped_early:
        print(f"stopped early: {result.stop_reason}")
    print(f"checkpoint: {args.out}")
    return 0


def cmd_eval(args) -> int:
    fv = _load_file_values(args)
    seed = _seed_from(args, fv)
    model, schedule_params, sampler_config, cluster = ckpt.load(args.ckpt)
    dataset = ingest(args.data)
    ckpt.check_vocab(model, dataset.num_items)
    sv = split(dataset)
    # checkpoint values are the defaults; flags and file keys override
    sampler_config = SamplerConfig(
        mode=_resolved(fv, args, "sampler.mode", args.mode, sampler_config.mode),
        steps=_resolved(fv, args, "sampler.steps", args.steps, sampler_config.steps),
        guidance_w=_resolved(fv, args, "sampler.guidance_w", args.guidance_w,
                             sampler_config.guidance_w),
        seed=seed)
    if cluster is not None and len(cluster.labels) != dataset.num_users:
        raise ContractError(
            f"checkpoint cluster assignments cover {len(cluster.labels)} users, "
            f"dataset has {dataset.num_users}")

    if args.steps_sweep:
        step_counts = [int(s) for s in args.steps_sweep.split(",") if s]
        lines = ["steps,hr10"]
        for n in step_counts:
            cfg = SamplerConfig(mode=sampler_config.mode, steps=n,
                                guidance_w=sampler_config.guidance_w, seed=seed)
            report = evaluate(model, sv, dataset.num_items, schedule_params, cfg,
                              which=args.which, cluster=cluster)
            lines.append(f"{n},{report.get('hr', 10):.4f}")
        text = "\n".join(lines) + "\n"
    else:
        report = evaluate(model, sv, dataset.num_items, schedule_params,
                          sampler_config, which=args.which, cluster=cluster)
        print(report.format_table())
        text = report.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_recommend(args) -> int:
    fv = _load_file_values(args)
    seed = _seed_from(args, fv)
    model, schedule_params, sampler_config, _cluster = ckpt.load(args.ckpt)
    if args.history == "-":
        raw = sys.stdin.read()
    else:
        with open(args.history) as fh:
            raw = fh.read()
    try:
        history = [int(tok) for tok in raw.split()]
    except ValueError:
        raise IngestError("history must be whitespace-separated integer item ids") from None
    if not history:
        raise ContractError("empty history")
    bad = [i for i in history if not 0 <= i < model.config.vocab]
    if bad:
        raise ContractError(f"unknown item id {bad[0]} "
                            f"(vocabulary is 0..{model.config.vocab - 1})")
    k = args.top_k
    if k > model.config.vocab:
        print(f"warning: K={k} exceeds vocabulary, truncating to {model.config.vocab}",
              file=sys.stderr)
        k = model.config.vocab
    cfg = SamplerConfig(
        mode=_resolved(fv, args, "sampler.mode", args.mode, sampler_config.mode),
        steps=_resolved(fv, args, "sampler.steps", args.steps, sampler_config.steps),
        guidance_w=_resolved(fv, args, "sampler.guidance_w", args.guidance_w,
                             sampler_config.guidance_w),
        seed=seed)
    h = model.encode([history]).data

    def predictor(x_s, s, x1):
        return model.project_x0(model.predict_x0(x_s, s, h).data)

    x0_hat = sample(h, predictor, schedule_params, cfg,
                    rng=np.random.default_rng(seed))
    scores = model.score_candidates(x0_hat).data[0]
    order = np.argsort(-scores, kind="stable")[:k]
    for item in order:
        print(f"{item}\t{scores[item]:.6f}")
    return 0


def cmd_verify(args) -> int:
    from .verify import format_report, run_all
    rows = run_all()
    print(format_report(rows))
    return 0 if all(passed for _, passed, _ in rows) else 2


def cmd_sweep(args) -> int:
    fv = _load_file_values(args)
    seed = _seed_from(args, fv)
    dataset = ingest(args.data)
    kinds = [s for s in args.kinds.split(",") if s]
    modes = [s for s in args.modes.split(",") if s]
    beta1s = [float(s) for s in args.beta1s.split(",") if s]
    dim = _resolved(fv, args, "model.dim", args.dim, 32)
    epochs = _resolved(fv, args, "train.epochs", args.epochs, 30)
    max_len = _resolved(fv, args, "model.max_len", args.max_len, 20)
    steps = _resolved(fv, args, "sampler.steps", args.steps, 12)
    beta0 = _resolved(fv, args, "schedule.beta0", args.beta0, 0.01)
    lines = ["kind,mode,beta1,hr10"]
    for kind in kinds:
        for mode in modes:
            for beta1 in beta1s:
                schedule_params = ScheduleParams(kind=kind, beta0=beta0, beta1=beta1)
                sampler_config = SamplerConfig(mode=mode, steps=steps,
                                               guidance_w=0.0, seed=seed)
                model_config = ModelConfig(vocab=dataset.num_items, dim=dim,
                                           blocks=2, max_len=max_len, dropout=0.2)
                train_config = TrainConfig(lr=0.001, batch_size=128, epochs=epochs,
                                           seed=seed, patience=epochs,
                                           eval_every=max(1, epochs // 5))
                result = fit(dataset, model_config, schedule_params,
                             sampler_config, train_config)
                report = evaluate(result.model, split(dataset), dataset.num_items,
                                  schedule_params, sampler_config, which="test")
                hr10 = report.get("hr", 10)
                lines.append(f"{kind},{mode},{beta1:g},{hr10:.4f}")
                print(lines[-1])
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "recommend": cmd_recommend,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (IngestError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
