"""Reproducibility front-end.

One binary, `attractorlab`, with subcommands for every stage: dataset
generation, training, evaluation, the ensemble grid, dimension estimation,
Lyapunov diagnostics, the Kac sample budget, and t-SNE of trained
parameters.  Every command that writes results emits a `repro.json` next
to them capturing the fully resolved configuration, the package version,
and a hash of every output file; `attractorlab replay` re-runs any such
file and verifies the outputs come back bit-identical.

Exit codes: 0 on success, 1 on numerical failure, 2 on usage errors.
Config files (JSON, or TOML when tomli/tomllib is available) provide
defaults; explicit flags win.  The environment variable ATTRACTORLAB_SEED
is the last-resort seed root.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .dynsys import (
    LorenzParams,
    integrate,
    lyapunov_spectrum,
    trajectory_from_binary,
    trajectory_from_csv,
)
from .errors import NonFiniteError
from .evaluate import (
    EvalConfig,
    correlation_dimension,
    evaluate_model,
    free_run,
    resolve_lambda1,
    run_ensemble,
    save_ensemble_report,
)
from .lstm import Architecture, MemoryInit
from .sampling import (
    Strategy,
    build_strategy,
    kac_sample_estimate,
    load_dataset,
    random_attractor_state,
    save_dataset,
)
from .seeding import derive, rng_from
from .training import TrainConfig, TrainedModel, train

ENV_SEED = "ATTRACTORLAB_SEED"

ALL_STRATEGIES = ["ergodic", "split", "random", "fixed-point"]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an ensemble grid run depends on.

    The per-model seed for model i is `seed_root ^ i`; parameter, shuffle
    and memory streams are split off each model seed with fixed salts, so
    seed roots expand to disjoint, reproducible per-model streams.
    """

    system: LorenzParams = field(default_factory=LorenzParams)
    strategies: tuple[str, ...] = tuple(ALL_STRATEGIES)
    memory_modes: tuple[str, ...] = ("zero",)
    n_models: int = 20
    data_seed: int = 1000
    seed_root: int = 0
    workers: int = 1
    dt: float = 0.01
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    save_models: bool = False

    def to_dict(self) -> dict:
        return {
            "system": {"sigma": self.system.sigma, "rho": self.system.rho,
                       "beta": self.system.beta},
            "strategies": list(self.strategies),
            "memory_modes": list(self.memory_modes),
            "n_models": self.n_models,
            "data_seed": self.data_seed,
            "seed_root": self.seed_root,
            "workers": self.workers,
            "dt": self.dt,
            "train": self.train.to_dict(),
            "eval": self.eval.to_dict(),
            "save_models": self.save_models,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        sys_d = d.get("system", {})
        return cls(
            system=LorenzParams(**sys_d) if sys_d else LorenzParams(),
            strategies=tuple(d.get("strategies", ALL_STRATEGIES)),
            memory_modes=tuple(d.get("memory_modes", ["zero"])),
            n_models=d.get("n_models", 20),
            data_seed=d.get("data_seed", 1000),
            seed_root=d.get("seed_root", 0),
            workers=d.get("workers", 1),
            dt=d.get("dt", 0.01),
            train=TrainConfig.from_dict(d["train"]) if "train" in d else TrainConfig(),
            eval=EvalConfig.from_dict(d["eval"]) if "eval" in d else EvalConfig(),
            save_models=d.get("save_models", False),
        )


# ---------------------------------------------------------------------------
# repro.json plumbing


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def hash_outputs(out_dir: Path) -> dict:
    out = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != "repro.json":
            out[str(path.relative_to(out_dir))] = _sha256(path)
    return out


def write_repro(out_dir: Path, command: str, config: dict) -> None:
    repro = {
        "command": command,
        "config": config,
        "version": __version__,
        "outputs": hash_outputs(out_dir),
    }
    with open(out_dir / "repro.json", "w", encoding="utf-8") as fh:
        json.dump(repro, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib as toml_mod  # py >= 3.11
        except ImportError:
            import tomli as toml_mod
        with open(path, "rb") as fh:
            return toml_mod.load(fh)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _seed_default(args_seed, config: dict, key: str = "seed", fallback: int = 0) -> int:
    if args_seed is not None:
        return args_seed
    if key in config:
        return int(config[key])
    env = os.environ.get(ENV_SEED)
    if env is not None:
        return int(env)
    return fallback


def _merged(args: argparse.Namespace) -> dict:
    return load_config_file(args.config) if getattr(args, "config", None) else {}


def _pick(args: argparse.Namespace, config: dict, name: str, default):
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


# ---------------------------------------------------------------------------
# command cores (replayable: config dict in, artifacts out)


def run_gen_data(config: dict, out_dir: Path) -> None:
    ds = build_strategy(
        config["strategy"],
        p=LorenzParams(**config.get("system", {})),
        dt=config.get("dt", 0.01),
        seed=config.get("seed", 0),
        budget=config.get("budget", 27_000),
        n_chunks=config.get("chunks", 9),
        transient=config.get("transient", 5_000),
        delta=config.get("delta", 1e-3),
    )
    save_dataset(ds, out_dir, fmt=config.get("format", "binary"))
    print(f"dataset: strategy={ds.strategy.value} chunks={len(ds.chunks)} "
          f"samples={ds.total_samples} seed={ds.seed} -> {out_dir}")


def run_train(config: dict, out_dir: Path) -> None:
    ds = load_dataset(config["data"])
    cfg = TrainConfig.from_dict(config["train"])
    arch = Architecture.from_dict(config["arch"]) if "arch" in config else Architecture()
    model = train(ds, cfg, arch=arch)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save(out_dir / "model.atlm")
    with open(out_dir / "history.json", "w", encoding="utf-8") as fh:
        json.dump({"loss_per_step": model.history}, fh, indent=2)
        fh.write("\n")
    best = min(model.history) if model.history else float("nan")
    print(f"trained: epochs={cfg.epochs} best-loss={best:.3e} -> {out_dir / 'model.atlm'}")


def run_evaluate(config: dict, out_dir: Path) -> None:
    model = TrainedModel.load(config["model"])
    eval_cfg = EvalConfig.from_dict(config["eval"])
    if eval_cfg.lambda1 is None:
        eval_cfg = replace(eval_cfg, lambda1=resolve_lambda1(eval_cfg))
    p = LorenzParams(**config.get("system", {}))
    eval_seed = config.get("eval_seed", 0)
    start = random_attractor_state(p, model.dt, rng=rng_from(derive(eval_seed, 0xE7A1)))
    lead = integrate(start, p, dt=model.dt, n_steps=eval_cfg.warmup + 1)
    warmup_seq = lead.samples[: eval_cfg.warmup]
    ic = lead.samples[eval_cfg.warmup]
    report, _ = evaluate_model(
        model, ic, MemoryInit(config.get("memory", "zero"), derive(eval_seed, 4)),
        eval_cfg, p, warmup_seq=warmup_seq,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict() | {"lambda1": eval_cfg.lambda1, "ic": ic.tolist()}
    with open(out_dir / "eval.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"valid_time={report.valid_time_lyapunov:.2f} Lyapunov units, "
          f"d2={report.d2:.3f}, failure={report.d2_failure}")


def run_d2(config: dict, out_dir: Path | None) -> None:
    if "traj" in config:
        path = config["traj"]
        reader = trajectory_from_csv if str(path).endswith(".csv") else trajectory_from_binary
        cloud = reader(path)
    else:
        model = TrainedModel.load(config["model"])
        steps = config.get("steps", 50_000)
        spinup = config.get("spinup", 1_000)
        seed = config.get("seed", 0)
        ic = random_attractor_state(rng=rng_from(derive(seed, 0xD2)))
        pred = free_run(model, ic, MemoryInit("zero", seed), spinup + steps)
        cloud = pred.samples[spinup:]
    est = correlation_dimension(
        cloud,
        n_points=config.get("points", 5_000),
        theiler=config.get("theiler", 20),
    )
    print(f"d2 = {est.d2:.4f}" + (" (degenerate cloud)" if est.degenerate else ""))
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "d2.json", "w", encoding="utf-8") as fh:
            json.dump({"d2": est.d2, "degenerate": est.degenerate,
                       "n_points": est.n_points}, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_lyapunov(config: dict, out_dir: Path | None) -> None:
    rep = lyapunov_spectrum(
        p=LorenzParams(**config.get("system", {})),
        dt=config.get("dt", 0.01),
        n_steps=config.get("steps", 2_000_000),
        seed=config.get("seed", 0),
        renorm_every=config.get("renorm", 10),
    )
    l1, l2, l3 = rep.exponents
    print(f"exponents = ({l1:.4f}, {l2:.4f}, {l3:.4f})  sum = {l1 + l2 + l3:.4f}")
    print(f"Kaplan-Yorke dimension = {rep.ky_dimension:.4f}")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "lyapunov.json", "w", encoding="utf-8") as fh:
            json.dump({"exponents": list(rep.exponents),
                       "ky_dimension": rep.ky_dimension,
                       "n_steps": rep.n_steps}, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_kac(config: dict, out_dir: Path | None) -> None:
    budget = kac_sample_estimate(
        config.get("epsilon", 0.01), config.get("dim", 2.06), config.get("prefactor", 1.0)
    )
    print(f"n_samples = {budget.n_samples}")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "kac.json", "w", encoding="utf-8") as fh:
            json.dump({"epsilon": budget.epsilon, "d_attr": budget.d_attr,
                       "prefactor": budget.prefactor, "n_samples": budget.n_samples},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_ensemble_grid(config: dict, out_dir: Path) -> None:
    exp = ExperimentConfig.from_dict(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    eval_cfg = exp.eval
    if eval_cfg.lambda1 is None:
        eval_cfg = replace(eval_cfg, lambda1=resolve_lambda1(eval_cfg))
    summary = {}
    for strategy in exp.strategies:
        for memory in exp.memory_modes:
            cell = f"{Strategy(strategy).value.replace('-', '_')}_{memory}"
            report = run_ensemble(
                strategy,
                memory_mode=memory,
                n_models=exp.n_models,
                cfg=exp.train,
                eval_cfg=eval_cfg,
                p=exp.system,
                dt=exp.dt,
                data_seed=exp.data_seed,
                seed_root=exp.seed_root,
                workers=exp.workers,
            )
            save_ensemble_report(report, out_dir / cell)
            summary[cell] = {
                "strategy": report.strategy,
                "memory": report.memory_mode,
                "n_models": len(report.reports),
                "failure_fraction": report.failure_fraction,
                "n_failed_runs": len(report.failed),
            }
            print(f"{cell}: failure_fraction={report.failure_fraction:.2f} "
                  f"({len(report.reports)} models)")
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_tsne(config: dict, out_dir: Path) -> None:
    vectors, ids, strategies, errors = [], [], [], []
    for model_path in config["models"]:
        model = TrainedModel.load(model_path)
        extra = json.loads(Path(model_path).with_suffix(".meta.json").read_text()) \
            if Path(model_path).with_suffix(".meta.json").exists() else {}
        vectors.append(model.params.flatten())
        ids.append(len(ids))
        strategies.append(extra.get("strategy", ""))
        errors.append(extra.get("d2_error", float("nan")))
    points = analysis.tsne(
        np.array(vectors),
        perplexity=config.get("perplexity", 15.0),
        n_iter=config.get("iters", 1_000),
        seed=config.get("seed", 0),
        model_ids=ids,
        strategies=strategies,
        d2_errors=errors,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    analysis.embedding_to_csv(points, out_dir / "embedding.csv")
    analysis.embedding_to_json(points, out_dir / "embedding.json")
    rd = analysis.radial_distribution(points, n_bins=config.get("bins", 20))
    with open(out_dir / "radial.json", "w", encoding="utf-8") as fh:
        json.dump({
            "bin_edges": rd.bin_edges.tolist(),
            "counts": {k: v.tolist() for k, v in rd.counts.items()},
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"embedded {len(points)} models -> {out_dir / 'embedding.csv'}")


_RUNNERS = {
    "gen-data": run_gen_data,
    "train": run_train,
    "evaluate": run_evaluate,
    "ensemble": run_ensemble_grid,
    "tsne": run_tsne,
    "d2": run_d2,
    "lyapunov": run_lyapunov,
    "kac": run_kac,
}


def _execute(command: str, config: dict, out_dir: Path | None) -> None:
    runner = _RUNNERS[command]
    if command in ("d2", "lyapunov", "kac"):
        runner(config, out_dir)
        if out_dir is not None:
            write_repro(out_dir, command, config)
    else:
        if out_dir is None:
            raise ValueError(f"{command} requires --out")
        runner(config, out_dir)
        write_repro(out_dir, command, config)


def run_replay(repro_path: str, out_dir: Path) -> int:
    with open(repro_path, encoding="utf-8") as fh:
        repro = json.load(fh)
    command = repro["command"]
    if command not in _RUNNERS:
        raise ValueError(f"unknown command {command!r} in {repro_path}")
    _execute(command, repro["config"], out_dir)
    fresh = hash_outputs(out_dir)
    if fresh == repro["outputs"]:
        print(f"replay OK: {len(fresh)} outputs bit-identical")
        return 0
    changed = sorted(
        set(fresh) ^ set(repro["outputs"])
        | {k for k in fresh.keys() & repro["outputs"].keys() if fresh[k] != repro["outputs"][k]}
    )
    print(f"replay MISMATCH in: {', '.join(changed)}", file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# argparse wiring


def _add_common(sub, with_out=True, out_required=True):
    sub.add_argument("--config", help="JSON or TOML config file with defaults")
    if with_out:
        sub.add_argument("--out", required=out_required, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attractorlab",
        description="Training-set design experiments for LSTM models of the Lorenz system",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    g = subs.add_parser("gen-data", help="build a training dataset")
    _add_common(g)
    g.add_argument("--strategy", required=True,
                   choices=[s.value for s in Strategy])
    g.add_argument("--seed", type=int)
    g.add_argument("--dt", type=float)
    g.add_argument("--budget", type=int, help="total samples (default 27000)")
    g.add_argument("--chunks", type=int, help="chunk count for split/random (default 9)")
    g.add_argument("--transient", type=int)
    g.add_argument("--delta", type=float, help="fixed-point launch deviation")
    g.add_argument("--format", choices=["binary", "csv"])
    g.set_defaults(func=cmd_gen_data)

    t = subs.add_parser("train", help="train one model on a saved dataset")
    _add_common(t)
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--epochs", type=int)
    t.add_argument("--tbptt", type=int)
    t.add_argument("--lr0", type=float)
    t.add_argument("--batch", type=int)
    t.add_argument("--memory", choices=["zero", "gaussian"])
    t.add_argument("--memory-seed", type=int)
    t.add_argument("--param-seed", type=int)
    t.add_argument("--shuffle-seed", type=int)
    t.add_argument("--hidden", help="comma-separated layer widths (default 50,50)")
    t.set_defaults(func=cmd_train)

    e = subs.add_parser("evaluate", help="score a trained model")
    _add_common(e)
    e.add_argument("--model", required=True, help="model file")
    e.add_argument("--eval-seed", type=int)
    e.add_argument("--memory", choices=["zero", "gaussian"])
    e.add_argument("--horizon", type=int)
    e.add_argument("--threshold", type=float)
    e.add_argument("--warmup", type=int)
    e.add_argument("--lambda1", type=float)
    e.add_argument("--d2-steps", type=int)
    e.set_defaults(func=cmd_evaluate)

    n = subs.add_parser("ensemble", help="run the strategy x memory grid")
    _add_common(n)
    n.add_argument("--strategy", default="all",
                   help="comma list of strategies, or 'all'")
    n.add_argument("--memory", default="zero", help="comma list: zero,gaussian")
    n.add_argument("--models", type=int)
    n.add_argument("--workers", type=int)
    n.add_argument("--seed-root", type=int)
    n.add_argument("--data-seed", type=int)
    n.add_argument("--epochs", type=int)
    n.add_argument("--lambda1", type=float)
    n.set_defaults(func=cmd_ensemble)

    d = subs.add_parser("d2", help="correlation dimension of a trajectory or model")
    _add_common(d, out_required=False)
    d.add_argument("--traj", help="trajectory file (.csv or .atlb)")
    d.add_argument("--model", help="model file: free-run then estimate")
    d.add_argument("--steps", type=int)
    d.add_argument("--points", type=int)
    d.add_argument("--theiler", type=int)
    d.add_argument("--seed", type=int)
    d.set_defaults(func=cmd_d2)

    ly = subs.add_parser("lyapunov", help="Lyapunov spectrum and KY dimension")
    _add_common(ly, out_required=False)
    ly.add_argument("--steps", type=int)
    ly.add_argument("--dt", type=float)
    ly.add_argument("--seed", type=int)
    ly.add_argument("--renorm", type=int)
    ly.set_defaults(func=cmd_lyapunov)

    k = subs.add_parser("kac", help="recurrence-time sample budget")
    _add_common(k, out_required=False)
    k.add_argument("--epsilon", type=float, required=True)
    k.add_argument("--dim", type=float, required=True)
    k.add_argument("--prefactor", type=float)
    k.set_defaults(func=cmd_kac)

    ts = subs.add_parser("tsne", help="embed trained model parameters")
    _add_common(ts)
    ts.add_argument("--models", nargs="+", required=True, help="model files")
    ts.add_argument("--perplexity", type=float)
    ts.add_argument("--iters", type=int)
    ts.add_argument("--seed", type=int)
    ts.set_defaults(func=cmd_tsne)

    r = subs.add_parser("replay", help="re-run a repro.json and verify outputs")
    r.add_argument("repro", help="path to a repro.json")
    r.add_argument("--out", required=True, help="fresh output directory")
    r.set_defaults(func=cmd_replay)

    return parser


def _collect(args, file_cfg: dict, mapping: dict) -> dict:
    config = {}
    for key, (attr, default) in mapping.items():
        value = getattr(args, attr, None)
        if value is None:
            value = file_cfg.get(key, default)
        if value is not None:
            config[key] = value
    return config


def cmd_gen_data(args) -> int:
    file_cfg = _merged(args)
    config = _collect(args, file_cfg, {
        "strategy": ("strategy", None),
        "dt": ("dt", 0.01),
        "budget": ("budget", 27_000),
        "chunks": ("chunks", 9),
        "transient": ("transient", 5_000),
        "delta": ("delta", 1e-3),
        "format": ("format", "binary"),
    })
    config["seed"] = _seed_default(args.seed, file_cfg)
    if "system" in file_cfg:
        config["system"] = file_cfg["system"]
    _execute("gen-data", config, Path(args.out))
    return 0


def cmd_train(args) -> int:
    file_cfg = _merged(args)
    train_cfg = dict(file_cfg.get("train", {}))
    for key, attr in [("epochs", "epochs"), ("tbptt_window", "tbptt"), ("lr0", "lr0"),
                      ("batch", "batch"), ("param_seed", "param_seed"),
                      ("shuffle_seed", "shuffle_seed")]:
        value = getattr(args, attr, None)
        if value is not None:
            train_cfg[key] = value
    if args.memory is not None or args.memory_seed is not None:
        mi = train_cfg.get("memory_init", {"mode": "zero", "seed": 0})
        if args.memory is not None:
            mi["mode"] = args.memory
        if args.memory_seed is not None:
            mi["seed"] = args.memory_seed
        train_cfg["memory_init"] = mi
    config = {"data": args.data, "train": TrainConfig.from_dict(train_cfg).to_dict()}
    if args.hidden:
        widths = tuple(int(w) for w in args.hidden.split(","))
        config["arch"] = Architecture(hidden=widths).to_dict()
    elif "arch" in file_cfg:
        config["arch"] = file_cfg["arch"]
    _execute("train", config, Path(args.out))
    return 0


def cmd_evaluate(args) -> int:
    file_cfg = _merged(args)
    eval_cfg = dict(file_cfg.get("eval", {}))
    for key, attr in [("horizon", "horizon"), ("threshold", "threshold"),
                      ("warmup", "warmup"), ("lambda1", "lambda1"),
                      ("d2_steps", "d2_steps")]:
        value = getattr(args, attr, None)
        if value is not None:
            eval_cfg[key] = value
    config = {
        "model": args.model,
        "eval": EvalConfig.from_dict(eval_cfg).to_dict(),
        "memory": args.memory or file_cfg.get("memory", "zero"),
        "eval_seed": _seed_default(args.eval_seed, file_cfg, "eval_seed"),
    }
    if "system" in file_cfg:
        config["system"] = file_cfg["system"]
    _execute("evaluate", config, Path(args.out))
    return 0


def cmd_ensemble(args) -> int:
    file_cfg = _merged(args)
    config = dict(file_cfg)
    strategies = args.strategy
    config["strategies"] = (
        ALL_STRATEGIES if strategies == "all" else [s.strip() for s in strategies.split(",")]
    )
    config["memory_modes"] = [m.strip() for m in args.memory.split(",")]
    for key, attr in [("n_models", "models"), ("workers", "workers"),
                      ("data_seed", "data_seed")]:
        value = getattr(args, attr, None)
        if value is not None:
            config[key] = value
    config["seed_root"] = _seed_default(args.seed_root, file_cfg, "seed_root")
    if args.epochs is not None:
        config.setdefault("train", {})["epochs"] = args.epochs
    if args.lambda1 is not None:
        config.setdefault("eval", {})["lambda1"] = args.lambda1
    config = ExperimentConfig.from_dict(config).to_dict()
    _execute("ensemble", config, Path(args.out))
    return 0


def cmd_d2(args) -> int:
    file_cfg = _merged(args)
    if not args.traj and not args.model:
        raise ValueError("d2 needs --traj or --model")
    config = _collect(args, file_cfg, {
        "steps": ("steps", 50_000),
        "points": ("points", 5_000),
        "theiler": ("theiler", 20),
    })
    config["seed"] = _seed_default(args.seed, file_cfg)
    if args.traj:
        config["traj"] = args.traj
        config.pop("steps", None)
        config.pop("seed", None)
    else:
        config["model"] = args.model
    _execute("d2", config, Path(args.out) if args.out else None)
    return 0


def cmd_lyapunov(args) -> int:
    file_cfg = _merged(args)
    config = _collect(args, file_cfg, {
        "steps": ("steps", 2_000_000),
        "dt": ("dt", 0.01),
        "renorm": ("renorm", 10),
    })
    config["seed"] = _seed_default(args.seed, file_cfg)
    if "system" in file_cfg:
        config["system"] = file_cfg["system"]
    _execute("lyapunov", config, Path(args.out) if args.out else None)
    return 0


def cmd_kac(args) -> int:
    config = {"epsilon": args.epsilon, "dim": args.dim}
    if args.prefactor is not None:
        config["prefactor"] = args.prefactor
    _execute("kac", config, Path(args.out) if args.out else None)
    return 0


def cmd_tsne(args) -> int:
    file_cfg = _merged(args)
    config = _collect(args, file_cfg, {
        "perplexity": ("perplexity", 15.0),
        "iters": ("iters", 1_000),
    })
    config["seed"] = _seed_default(args.seed, file_cfg)
    config["models"] = list(args.models)
    _execute("tsne", config, Path(args.out))
    return 0


def cmd_replay(args) -> int:
    return run_replay(args.repro, Path(args.out))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NonFiniteError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
