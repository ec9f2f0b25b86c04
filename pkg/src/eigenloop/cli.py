"""Command-line entry point.

Subcommands: gen, pretrain, run, sweep, serve, print-config. Every command
is deterministic given (config, seed): reruns produce byte-identical CSVs.
Report paths additionally render figures next to the delimited output.

Exit codes: 0 success, 2 config error, 3 data error, 4 training error.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys
from pathlib import Path
from typing import Sequence

from . import config as cfgmod
from . import report
from .contrastive import history_to_csv as pretrain_history_to_csv
from .contrastive import load_encoder, pretrain, save_encoder
from .core import LabeledSet, save_embeddings, save_labels
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DegenerateInputError,
    EigenloopError,
    FormatError,
    ShapeError,
    TrainingError,
)
from .transfer import (
    GroundTruthOracle,
    HistoryRow,
    history_to_csv,
    progressive_loop,
    random_baseline,
)

ADDR_ENV = "EIGENLOOP_ADDR"


def _fmt(x: float) -> str:
    return repr(float(x))


def _mean_row(rows: list[HistoryRow]) -> tuple[float, float, float, float]:
    n = len(rows)
    return (
        sum(r.labels_spent for r in rows) / n,
        sum(r.bcubed for r in rows) / n,
        sum(r.top1 for r in rows) / n,
        sum(r.mean_per_class for r in rows) / n,
    )


def cmd_gen(cfg: dict, out: Path) -> None:
    if cfg["data"].get("synthetic") is None:
        raise ConfigError("data.synthetic: gen requires a synthetic data section")
    data = cfgmod.build_data(cfg)
    out.mkdir(parents=True, exist_ok=True)
    assert data.source is not None and data.source_labels is not None
    for name, emb, labels in (
        ("source", data.source, data.source_labels),
        ("target", data.target, data.target_labels),
        ("test", data.test, data.test_labels),
    ):
        # the container stores ids positionally, so sidecars are written
        # against 0-based row positions to keep each file pair standalone
        rebased = LabeledSet(
            labels.num_classes, {pos: labels.label(sid) for pos, sid in enumerate(emb.ids)}
        )
        save_embeddings(emb, out / f"{name}.emb1")
        save_labels(rebased, out / f"{name}.labels")
        print(f"wrote {out / f'{name}.emb1'} ({emb.n}x{emb.dim}) + labels")


def cmd_pretrain(cfg: dict, out: Path) -> None:
    data = cfgmod.build_data(cfg)
    pcfg = cfgmod.build_pretrain_config(cfg)
    initial = None
    if pcfg.mix.mode == "UF":
        path = cfg["pretrain"]["initial_encoder"]
        if not path:
            raise ConfigError("pretrain.initial_encoder: required for mode UF")
        initial = load_encoder(path)
    source = data.source if pcfg.mix.mode != "UF" else None
    if pcfg.mix.mode in ("VUP", "TUP") and source is None:
        raise ConfigError(f"data.files.source: required for pretraining mode {pcfg.mix.mode}")
    target = data.target if pcfg.mix.mode in ("TUP", "UF") else None
    encoder, history = pretrain(source, target, pcfg, initial)
    out.mkdir(parents=True, exist_ok=True)
    save_encoder(encoder, out / "encoder.enc1")
    pretrain_history_to_csv(history, out / "pretrain_history.csv")
    if history:
        report.save_pretrain_figure(history, out / "pretrain_history.png")
    print(f"wrote {out / 'encoder.enc1'} and pretrain_history.csv ({len(history)} epochs)")


def cmd_run(cfg: dict, out: Path) -> None:
    data = cfgmod.build_data(cfg)
    inputs = cfgmod.build_transfer_inputs(cfg, data)
    if inputs.oracle_kind != "groundtruth":
        raise ConfigError("transfer.oracle: cmd run needs 'groundtruth'; use 'serve' for interactive")
    oracle = GroundTruthOracle(inputs.truth)
    out.mkdir(parents=True, exist_ok=True)

    progressive: dict[int, list[HistoryRow]] = {}
    baseline: dict[int, HistoryRow] = {}
    for seed in cfg["transfer"]["seeds"]:
        _, state = progressive_loop(
            inputs.features,
            inputs.indicators,
            inputs.budget,
            oracle,
            truth=inputs.truth,
            test=inputs.test,
            test_truth=inputs.test_truth,
            finetune_cfg=inputs.finetune_cfg,
            kmeans_cfg=inputs.kmeans_cfg,
            seed=seed,
            normalize=inputs.normalize,
        )
        progressive[seed] = state.history
        history_to_csv(state.history, out / f"metrics_progressive_seed{seed}.csv")
        _, base_row = random_baseline(
            inputs.features,
            inputs.indicators,
            inputs.budget.total_extra,
            oracle,
            truth=inputs.truth,
            test=inputs.test,
            test_truth=inputs.test_truth,
            finetune_cfg=inputs.finetune_cfg,
            seed=seed,
            normalize=inputs.normalize,
        )
        baseline[seed] = base_row
        print(
            f"seed {seed}: progressive top1 {state.history[-1].top1:.4f} "
            f"vs random {base_row.top1:.4f}"
        )

    lines = ["method,seed,labels_spent,bcubed,top1,mean_per_class\n"]
    for seed in cfg["transfer"]["seeds"]:
        r = progressive[seed][-1]
        lines.append(
            f"progressive,{seed},{r.labels_spent},{_fmt(r.bcubed)},{_fmt(r.top1)},{_fmt(r.mean_per_class)}\n"
        )
    spent, bc, t1, mpc = _mean_row([progressive[s][-1] for s in cfg["transfer"]["seeds"]])
    lines.append(f"progressive,mean,{_fmt(spent)},{_fmt(bc)},{_fmt(t1)},{_fmt(mpc)}\n")
    for seed in cfg["transfer"]["seeds"]:
        r = baseline[seed]
        lines.append(
            f"random,{seed},{r.labels_spent},{_fmt(r.bcubed)},{_fmt(r.top1)},{_fmt(r.mean_per_class)}\n"
        )
    spent, bc, t1, mpc = _mean_row(list(baseline.values()))
    lines.append(f"random,mean,{_fmt(spent)},{_fmt(bc)},{_fmt(t1)},{_fmt(mpc)}\n")
    (out / "report.csv").write_text("".join(lines), encoding="utf-8")
    report.save_run_figure(progressive, baseline, out / "report.png")
    print(f"wrote {out / 'report.csv'} and report.png")


def cmd_sweep(cfg: dict, out: Path, parameter: str | None) -> None:
    sweep = cfg["sweep"]
    parameter = parameter or sweep["parameter"]
    if parameter not in ("p", "b"):
        raise ConfigError(f"sweep.parameter: must be 'p' or 'b', got {parameter!r}")
    values = sweep["values"]
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values: must be a non-empty list")

    data = cfgmod.build_data(cfg)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []

    if parameter == "p":
        if data.source is None:
            raise ConfigError("data.files.source: required for a re-balance sweep")
        for value in values:
            run_cfg = copy.deepcopy(cfg)
            run_cfg["pretrain"]["rebalance_p"] = float(value)
            run_cfg["pretrain"]["mode"] = "TUP"
            pcfg = cfgmod.build_pretrain_config(run_cfg)
            encoder, _ = pretrain(data.source, data.target, pcfg)
            rows.append(_sweep_point(run_cfg, data, encoder=encoder, value=value))
    else:
        totals = set()
        for value in values:
            if not isinstance(value, list) or not all(isinstance(x, int) and x >= 1 for x in value):
                raise ConfigError("sweep.values: b schedules must be lists of integers >= 1")
            totals.add(sum(value))
        if len(totals) != 1:
            raise ConfigError(f"sweep.values: schedules must share one total budget, got totals {sorted(totals)}")
        for value in values:
            run_cfg = copy.deepcopy(cfg)
            run_cfg["transfer"]["b"] = list(value)
            run_cfg["transfer"]["K"] = None
            rows.append(_sweep_point(run_cfg, data, encoder=None, value="+".join(map(str, value))))

    lines = ["parameter,value,labels_spent,bcubed,top1,mean_per_class\n"]
    for r in rows:
        lines.append(
            f"{parameter},{r['value']},{_fmt(r['labels_spent'])},{_fmt(r['bcubed'])},{_fmt(r['top1'])},{_fmt(r['mean_per_class'])}\n"
        )
    csv_path = out / f"sweep_{parameter}.csv"
    csv_path.write_text("".join(lines), encoding="utf-8")
    report.save_sweep_figure(rows, parameter, out / f"sweep_{parameter}.png")
    print(f"wrote {csv_path} and sweep_{parameter}.png")


def _sweep_point(cfg: dict, data, encoder, value) -> dict:
    inputs = cfgmod.build_transfer_inputs(cfg, data, encoder=encoder)
    oracle = GroundTruthOracle(inputs.truth)
    finals: list[HistoryRow] = []
    for seed in cfg["transfer"]["seeds"]:
        _, state = progressive_loop(
            inputs.features,
            inputs.indicators,
            inputs.budget,
            oracle,
            truth=inputs.truth,
            test=inputs.test,
            test_truth=inputs.test_truth,
            finetune_cfg=inputs.finetune_cfg,
            kmeans_cfg=inputs.kmeans_cfg,
            seed=seed,
            normalize=inputs.normalize,
        )
        finals.append(state.history[-1])
    spent, bc, t1, mpc = _mean_row(finals)
    return {
        "value": value,
        "labels_spent": spent,
        "bcubed": bc,
        "top1": t1,
        "mean_per_class": mpc,
    }


def _parse_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"addr: expected HOST:PORT, got {addr!r}")
    try:
        port_num = int(port)
    except ValueError:
        raise ConfigError(f"addr: invalid port {port!r}") from None
    if not 0 < port_num < 65536:
        raise ConfigError(f"addr: port {port_num} out of range")
    return host, port_num


def cmd_serve(cfg: dict, out: Path, addr: str | None) -> None:
    import uvicorn

    from .service import create_app

    addr = addr or os.environ.get(ADDR_ENV) or "127.0.0.1:8321"
    host, port = _parse_addr(addr)
    app = create_app()
    out.mkdir(parents=True, exist_ok=True)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        # shutdown contract: suspended sessions are checkpointed on exit
        for sid, session in app.state.sessions.items():
            path = out / f"evolution_state_{sid}.json"
            with session.lock:
                session.loop.save_state(path)
            print(f"checkpointed session {sid} to {path}")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eigenloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("gen", "generate a synthetic dataset (EMB1 + label sidecars)"),
        ("pretrain", "contrastively pretrain the encoder; write checkpoint + loss CSV"),
        ("run", "run the progressive loop and random baseline over the seed list"),
        ("sweep", "sweep the re-balance ratio p or the per-step budget b"),
        ("serve", "serve the annotation HTTP API"),
        ("print-config", "print the default configuration"),
    ):
        p = sub.add_parser(name, help=helptext)
        if name != "print-config":
            p.add_argument("--config", type=Path, default=None, help="YAML config path")
            p.add_argument("--seed", type=int, default=None, help="override the config seed")
            p.add_argument("--out", type=Path, default=None, help="override the output directory")
        if name == "sweep":
            p.add_argument("--parameter", choices=("p", "b"), default=None)
        if name == "serve":
            p.add_argument("--addr", default=None, help=f"HOST:PORT (default ${ADDR_ENV} or 127.0.0.1:8321)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "print-config":
            print(cfgmod.default_config_yaml(), end="")
            return 0
        overrides = {"seed": args.seed, "out": str(args.out) if args.out else None}
        cfg = cfgmod.load_config(args.config, overrides)
        out = Path(cfg["out"])
        if args.command == "gen":
            cmd_gen(cfg, out)
        elif args.command == "pretrain":
            cmd_pretrain(cfg, out)
        elif args.command == "run":
            cmd_run(cfg, out)
        elif args.command == "sweep":
            cmd_sweep(cfg, out, args.parameter)
        elif args.command == "serve":
            cmd_serve(cfg, out, args.addr)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FormatError, ShapeError, DegenerateInputError, ContractError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 4
    except EigenloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
