"""Command-line pipeline: data generation, training, sampling, evaluation,
rate study, architecture ablation, and the analytic-score oracle check.

Every command resolves its configuration from defaults, an optional JSON
config file (``--config``, which may also be a previously written manifest),
and explicit flags, in that order, then writes a manifest echoing the full
resolved configuration together with content hashes of inputs and outputs.
Re-running a command from its manifest reproduces the output hashes
(wall-clock diagnostics such as the loss log are listed but not hashed).

Exit codes: 0 success, 2 usage/config error, 3 numeric failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import datagen, metrics, net as nets, ou, plots, sampler, score
from .ioutil import FormatError, NumericError, atomic_write_text, sha256_file, write_json

ENV_OUTDIR = "DIFFREG_OUTDIR"


def _default_outdir() -> Path:
    return Path(os.environ.get(ENV_OUTDIR, "diffreg_out"))


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _kv_pairs(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = _parse_value(v)
    return out


def _load_config(path, command: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "config" in data and "command" in data:
        if data["command"] != command:
            raise ValueError(f"manifest is for command {data['command']!r}, not {command!r}")
        data = data["config"]
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _resolve(defaults: dict, args, command: str, dict_keys=()) -> dict:
    cfg = dict(defaults)
    if getattr(args, "config", None):
        file_cfg = _load_config(args.config, command)
        for k, v in file_cfg.items():
            if k not in defaults:
                raise ValueError(f"unknown config key {k!r} for {command}")
            if k in dict_keys and isinstance(v, dict):
                merged = dict(cfg[k])
                merged.update(v)
                cfg[k] = merged
            else:
                cfg[k] = v
    for k in defaults:
        v = getattr(args, k, None)
        if v is None:
            continue
        if k in dict_keys:
            if v:
                merged = dict(cfg[k])
                merged.update(_kv_pairs(v) if not isinstance(v, dict) else v)
                cfg[k] = merged
        else:
            cfg[k] = v
    return cfg


def _manifest(path: Path, command: str, cfg: dict, inputs: dict, outputs: list, diagnostics: list = ()):
    base = path.parent
    man = {
        "command": command,
        "config": cfg,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {os.path.relpath(p, base): sha256_file(p) for p in outputs},
        "diagnostics": [os.path.relpath(p, base) for p in diagnostics],
    }
    write_json(path, man)
    return man


def _make_generator(cfg: dict) -> datagen.Generator:
    return datagen.make_generator(cfg["generator"], **cfg.get("gen_params", {}))


def _write_samples_csv(path, points):
    points = np.atleast_2d(points)
    header = ",".join(["chain"] + [f"y{i}" for i in range(points.shape[1])])
    lines = [header]
    for i, row in enumerate(points):
        lines.append(",".join([str(i)] + [repr(float(v)) for v in row]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _parse_x(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ValueError(f"cannot parse covariate {text!r}: {exc}") from None


def _model_sampler(model: score.ScoreModel, cfg_sampler: sampler.SamplerConfig):
    fn = model.as_score_fn()

    def run(x, k, rng):
        return sampler.sample(fn, x, k, model.problem.dim_y, model.partition, model.schedule, cfg_sampler, rng)

    return run


# -----------------------------------------------------------------------
# commands
# -----------------------------------------------------------------------

GEN_DEFAULTS = {"generator": "bimodal1d", "gen_params": {}, "n": 1024, "seed": 0, "out": None, "csv": False}


def cmd_gen_data(args) -> int:
    cfg = _resolve(GEN_DEFAULTS, args, "gen-data", dict_keys=("gen_params",))
    gen = _make_generator(cfg)
    out = Path(cfg["out"] or _default_outdir() / "data.cdrg")
    cfg["out"] = str(out)
    rng = np.random.default_rng(cfg["seed"])
    ds = gen.sample_joint(cfg["n"], rng, seed=cfg["seed"])
    ds.save(out)
    outputs = [out]
    if cfg["csv"]:
        csv_path = out.with_suffix(".csv")
        ds.to_csv(csv_path)
        outputs.append(csv_path)
    _manifest(out.parent / (out.name + ".manifest.json"), "gen-data", cfg, [], outputs)
    print(f"wrote {out} (n={ds.n}, dims {ds.dim_x}+{ds.dim_y})")
    return 0


TRAIN_DEFAULTS = {
    "data": None,
    "out": None,
    "mode": "euclidean",
    "alpha_x": 1.0,
    "alpha_y": 1.0,
    "intrinsic_x": None,
    "intrinsic_y": None,
    "constants": {},
    "caps": {},
    "steps": 400,
    "batch": 128,
    "draws": 2,
    "lr": 3e-3,
    "time_sampling": "weighted",
    "delta0": 1.0,
    "seed": 0,
    "resume": None,
}


def _train_from_config(cfg: dict, dataset: datagen.Dataset):
    problem = score.ProblemSpec(
        dim_x=dataset.dim_x,
        dim_y=dataset.dim_y,
        intrinsic_x=cfg["intrinsic_x"] or dataset.dim_x,
        intrinsic_y=cfg["intrinsic_y"] or dataset.dim_y,
        alpha_x=cfg["alpha_x"],
        alpha_y=cfg["alpha_y"],
        n=dataset.n,
    )
    sched = score.schedule_from_theory(problem, mode=cfg["mode"], constants=cfg["constants"], caps=cfg["caps"])
    ou_schedule = ou.OUSchedule(kind="constant", delta0=cfg["delta0"])
    train_cfg = score.TrainConfig(
        steps_per_bin=cfg["steps"],
        batch_size=cfg["batch"],
        draws_per_point=cfg["draws"],
        lr=cfg["lr"],
        time_sampling=cfg["time_sampling"],
        seed=cfg["seed"],
    )
    init_networks = None
    rng_label = 0
    if cfg.get("resume"):
        prev = score.ScoreModel.load(cfg["resume"])
        if prev.partition != sched.partition:
            raise ValueError("resume checkpoint partition does not match the schedule")
        init_networks = prev.networks
        rng_label = 1
    model, traces = score.train(dataset.x, dataset.y, sched, ou_schedule, problem, train_cfg, init_networks=init_networks, rng_label=rng_label)
    return model, traces, sched


def cmd_train(args) -> int:
    cfg = _resolve(TRAIN_DEFAULTS, args, "train", dict_keys=("constants", "caps"))
    if not cfg["data"]:
        raise ValueError("train requires --data")
    dataset = datagen.Dataset.load(cfg["data"])
    out = Path(cfg["out"] or _default_outdir() / "model.cdsm")
    cfg["out"] = str(out)
    model, traces, sched = _train_from_config(cfg, dataset)
    model.save(out)
    sched_path = out.parent / (out.stem + ".schedule.json")
    write_json(sched_path, sched.to_jsonable())
    loss_path = out.parent / (out.stem + ".losses.csv")
    lines = ["bin,step,loss,wall_ms"]
    lines += [f"{r['bin']},{r['step']},{r['loss']!r},{r['wall_ms']:.3f}" for r in traces]
    atomic_write_text(loss_path, "\n".join(lines) + "\n")
    inputs = [cfg["data"]] + ([cfg["resume"]] if cfg.get("resume") else [])
    _manifest(out.parent / (out.name + ".manifest.json"), "train", cfg, inputs, [out, sched_path], diagnostics=[loss_path])
    final = {}
    for r in traces:
        final[r["bin"]] = r["loss"]
    print(f"trained {sched.partition.n_bins} bins; final losses finite: {all(math.isfinite(v) for v in final.values())}")
    print(f"wrote {out}")
    return 0


SAMPLE_DEFAULTS = {
    "checkpoint": None,
    "x": None,
    "k": 1000,
    "substeps": 8,
    "integrator": "euler_maruyama",
    "truncation": 4.0,
    "seed": 0,
    "out": None,
}


def cmd_sample(args) -> int:
    cfg = _resolve(SAMPLE_DEFAULTS, args, "sample")
    if not cfg["checkpoint"]:
        raise ValueError("sample requires --checkpoint")
    if cfg["x"] is None:
        raise ValueError("sample requires --x (comma-separated covariate)")
    model = score.ScoreModel.load(cfg["checkpoint"])
    x = _parse_x(cfg["x"]) if isinstance(cfg["x"], str) else np.asarray(cfg["x"], dtype=float)
    if x.shape != (model.problem.dim_x,):
        raise ValueError(f"covariate has dimension {x.size}, model expects {model.problem.dim_x}")
    out = Path(cfg["out"] or _default_outdir() / "samples.csv")
    cfg["out"] = str(out)
    s_cfg = sampler.SamplerConfig(substeps=cfg["substeps"], integrator=cfg["integrator"], truncation=cfg["truncation"])
    rng = np.random.default_rng(cfg["seed"])
    result = _model_sampler(model, s_cfg)(x, cfg["k"], rng)
    _write_samples_csv(out, result.points)
    man = _manifest(out.parent / (out.name + ".manifest.json"), "sample", cfg, [cfg["checkpoint"]], [out])
    man["truncation_rate"] = result.truncation_rate
    write_json(out.parent / (out.name + ".manifest.json"), man)
    print(f"wrote {out} ({cfg['k']} samples, truncation rate {result.truncation_rate:.4f})")
    return 0


EVAL_DEFAULTS = {
    "checkpoint": None,
    "generator": "bimodal1d",
    "gen_params": {},
    "m": 16,
    "k": 256,
    "metric": "auto",
    "n_proj": 128,
    "substeps": 8,
    "integrator": "euler_maruyama",
    "truncation": None,
    "seed": 0,
    "out": None,
    "svg": True,
}


def cmd_evaluate(args) -> int:
    cfg = _resolve(EVAL_DEFAULTS, args, "evaluate", dict_keys=("gen_params",))
    if not cfg["checkpoint"]:
        raise ValueError("evaluate requires --checkpoint")
    model = score.ScoreModel.load(cfg["checkpoint"])
    gen = _make_generator(cfg)
    if gen.dim_x != model.problem.dim_x or gen.dim_y != model.problem.dim_y:
        raise ValueError("generator dimensions do not match the checkpoint")
    out = Path(cfg["out"] or _default_outdir() / "report.json")
    cfg["out"] = str(out)
    if cfg["truncation"] is None:
        cfg["truncation"] = 2.0 * gen.y_radius
    s_cfg = sampler.SamplerConfig(substeps=cfg["substeps"], integrator=cfg["integrator"], truncation=cfg["truncation"])
    rng = np.random.default_rng(cfg["seed"])
    report = metrics.expected_conditional_error(
        _model_sampler(model, s_cfg), gen, cfg["m"], cfg["k"], rng, metric=cfg["metric"], n_proj=cfg["n_proj"]
    )
    payload = report.to_jsonable()
    payload["config"].update({"generator": gen.describe(), "sampler": {"substeps": cfg["substeps"], "integrator": cfg["integrator"], "truncation": cfg["truncation"]}})
    write_json(out, payload)
    csv_path = out.parent / (out.stem + ".per_covariate.csv")
    atomic_write_text(csv_path, report.per_covariate_csv())
    outputs = [out, csv_path]
    if cfg["svg"]:
        x0 = report.per_x[0]
        plot_rng = np.random.default_rng([cfg["seed"], 99])
        pts = _model_sampler(model, s_cfg)(x0, cfg["k"], plot_rng).points
        truth = gen.sample_conditional(x0, cfg["k"], plot_rng)
        svg_path = out.parent / (out.stem + ".svg")
        if gen.dim_y == 1:
            plots.histogram_overlay(svg_path, pts, truth, title=f"x = {np.round(x0, 3).tolist()}")
        else:
            plots.scatter_pair(svg_path, pts, truth, title=f"x = {np.round(x0, 3).tolist()}")
        outputs.append(svg_path)
    _manifest(out.parent / (out.name + ".manifest.json"), "evaluate", cfg, [cfg["checkpoint"]], outputs)
    print(f"{report.metric}: mean {report.mean:.4f} +/- {report.stderr:.4f} (noise floor {report.noise_floor:.4f})")
    print(f"wrote {out}")
    return 0


RATE_DEFAULTS = {
    "generator": "bimodal1d",
    "gen_params": {},
    "n_list": [512, 1024, 2048, 4096, 8192],
    "mode": "euclidean",
    "alpha_x": 1.0,
    "alpha_y": 1.0,
    "intrinsic_x": None,
    "intrinsic_y": None,
    "constants": {},
    "caps": {},
    "steps": 400,
    "batch": 128,
    "draws": 2,
    "lr": 3e-3,
    "time_sampling": "weighted",
    "delta0": 1.0,
    "m": 16,
    "k": 256,
    "metric": "auto",
    "n_proj": 128,
    "substeps": 8,
    "integrator": "euler_maruyama",
    "seed": 0,
    "out": None,
}


def _fit_loglog(ns, means):
    lx = np.log(np.asarray(ns, dtype=float))
    ly = np.log(np.asarray(means, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def cmd_rate_study(args) -> int:
    cfg = _resolve(RATE_DEFAULTS, args, "rate-study", dict_keys=("gen_params", "constants", "caps"))
    if isinstance(cfg["n_list"], str):
        cfg["n_list"] = [int(v) for v in cfg["n_list"].split(",")]
    outdir = Path(cfg["out"] or _default_outdir() / "rate_study")
    cfg["out"] = str(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    gen = _make_generator(cfg)
    rows = []
    for n in cfg["n_list"]:
        run_seed = [cfg["seed"], int(n)]
        rng = np.random.default_rng(run_seed)
        ds = gen.sample_joint(int(n), rng, seed=run_seed)
        sub = dict(cfg)
        sub["seed"] = int(np.random.default_rng(run_seed).integers(2**31))
        model, _, _ = _train_from_config(sub, ds)
        s_cfg = sampler.SamplerConfig(substeps=cfg["substeps"], integrator=cfg["integrator"], truncation=2.0 * gen.y_radius)
        report = metrics.expected_conditional_error(
            _model_sampler(model, s_cfg), gen, cfg["m"], cfg["k"], np.random.default_rng([cfg["seed"], int(n), 1]), metric=cfg["metric"], n_proj=cfg["n_proj"]
        )
        rows.append({"n": int(n), "mean": report.mean, "stderr": report.stderr, "floor": report.noise_floor})
        print(f"n={n}: mean {report.mean:.4f} +/- {report.stderr:.4f} (floor {report.noise_floor:.4f})")
    slope, intercept = _fit_loglog([r["n"] for r in rows], [r["mean"] for r in rows])
    problem = score.ProblemSpec(
        dim_x=gen.dim_x,
        dim_y=gen.dim_y,
        intrinsic_x=cfg["intrinsic_x"] or gen.intrinsic_x,
        intrinsic_y=cfg["intrinsic_y"] or gen.intrinsic_y,
        alpha_x=cfg["alpha_x"],
        alpha_y=cfg["alpha_y"],
        n=max(cfg["n_list"]),
    )
    theory = score.w1_rate_exponent(problem, mode=cfg["mode"])
    result = {"rows": rows, "slope": slope, "intercept": intercept, "theory_exponent": theory, "mode": cfg["mode"]}
    json_path = outdir / "rate.json"
    write_json(json_path, result)
    csv_path = outdir / "rate.csv"
    lines = ["n,mean,stderr,floor"] + [f"{r['n']},{r['mean']!r},{r['stderr']!r},{r['floor']!r}" for r in rows]
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    svg_path = outdir / "rate.svg"
    plots.rate_curve(svg_path, [r["n"] for r in rows], [r["mean"] for r in rows], [r["stderr"] for r in rows], slope, intercept, theory)
    _manifest(outdir / "manifest.json", "rate-study", cfg, [], [json_path, csv_path, svg_path])
    print(f"fitted slope {slope:.4f} (theory exponent {theory:.4f}); wrote {outdir}")
    return 0


ABLATION_DEFAULTS = {
    "generator": "bimodal1d",
    "gen_params": {},
    "n": 4096,
    "mode": "euclidean",
    "alpha_x": 1.0,
    "alpha_y": 1.0,
    "intrinsic_x": None,
    "intrinsic_y": None,
    "constants": {},
    "caps": {},
    "steps": 400,
    "batch": 128,
    "draws": 2,
    "lr": 3e-3,
    "time_sampling": "weighted",
    "delta0": 1.0,
    "m": 16,
    "k": 256,
    "metric": "auto",
    "n_proj": 128,
    "substeps": 8,
    "integrator": "euler_maruyama",
    "seed": 0,
    "out": None,
}


def _monolithic_width(in_dim: int, out_dim: int, height: int, target: int):
    """Width whose parameter count is closest to ``target`` for this depth."""
    def count(w):
        widths = (in_dim,) + (w,) * (height - 1) + (out_dim,)
        return nets.NetSpec(widths).param_count()

    w = 1
    while count(w) < target:
        w += 1
    if w > 1 and abs(count(w - 1) - target) <= abs(count(w) - target):
        w -= 1
    return w, count(w)


def cmd_ablation(args) -> int:
    cfg = _resolve(ABLATION_DEFAULTS, args, "ablation", dict_keys=("gen_params", "constants", "caps"))
    outdir = Path(cfg["out"] or _default_outdir() / "ablation")
    cfg["out"] = str(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    gen = _make_generator(cfg)
    rng = np.random.default_rng([cfg["seed"], 0])
    ds = gen.sample_joint(cfg["n"], rng, seed=cfg["seed"])

    model, _, sched = _train_from_config(dict(cfg, data=None, resume=None), ds)
    total_params = sum(ns.param_count() for ns in sched.net_specs)
    height = sched.net_specs[0].height
    in_dim = gen.dim_y + gen.dim_x + 1
    width, mono_params = _monolithic_width(in_dim, gen.dim_y, height, total_params)
    rel_gap = abs(mono_params - total_params) / total_params
    if rel_gap > 0.10:
        print(f"warning: parameter budgets differ by {rel_gap:.1%} ({mono_params} vs {total_params})")
    v_mono = max(ns.output_bound for ns in sched.net_specs)
    mono_spec = nets.NetSpec((in_dim,) + (width,) * (height - 1) + (gen.dim_y,), output_bound=v_mono)
    train_cfg = score.TrainConfig(
        steps_per_bin=cfg["steps"], batch_size=cfg["batch"], draws_per_point=cfg["draws"], lr=cfg["lr"], time_sampling=cfg["time_sampling"], seed=cfg["seed"]
    )
    ou_schedule = ou.OUSchedule(kind="constant", delta0=cfg["delta0"])
    mono_net = score.train_monolithic(ds.x, ds.y, mono_spec, sched.partition, ou_schedule, train_cfg, total_steps=sched.partition.n_bins * cfg["steps"])

    s_cfg = sampler.SamplerConfig(substeps=cfg["substeps"], integrator=cfg["integrator"], truncation=2.0 * gen.y_radius)
    eval_seed = [cfg["seed"], 1]
    piece_report = metrics.expected_conditional_error(
        _model_sampler(model, s_cfg), gen, cfg["m"], cfg["k"], np.random.default_rng(eval_seed), metric=cfg["metric"], n_proj=cfg["n_proj"]
    )

    def mono_score(y, x, t):
        xb = np.broadcast_to(np.asarray(x, float), (len(y), gen.dim_x))
        tb = np.full((len(y), 1), float(t))
        return mono_net.forward(np.concatenate([y, xb, tb], axis=1))

    def mono_sampler(x, k, rng_):
        return sampler.sample(mono_score, x, k, gen.dim_y, sched.partition, ou_schedule, s_cfg, rng_)

    mono_report = metrics.expected_conditional_error(
        mono_sampler, gen, cfg["m"], cfg["k"], np.random.default_rng(eval_seed), metric=cfg["metric"], n_proj=cfg["n_proj"]
    )
    result = {
        "piecewise": {"mean": piece_report.mean, "stderr": piece_report.stderr, "params": total_params, "v_levels": [ns.output_bound for ns in sched.net_specs]},
        "monolithic": {"mean": mono_report.mean, "stderr": mono_report.stderr, "params": mono_params, "v_level": v_mono, "width": width},
        "error_ratio_mono_over_piecewise": mono_report.mean / piece_report.mean if piece_report.mean > 0 else float("nan"),
        "noise_floor": piece_report.noise_floor,
        "param_gap": rel_gap,
    }
    json_path = outdir / "ablation.json"
    write_json(json_path, result)
    csv_path = outdir / "ablation.csv"
    atomic_write_text(csv_path, "arm,mean,stderr,params\n" + f"piecewise,{piece_report.mean!r},{piece_report.stderr!r},{total_params}\n" + f"monolithic,{mono_report.mean!r},{mono_report.stderr!r},{mono_params}\n")
    svg_path = outdir / "ablation.svg"
    plots.ablation_bars(svg_path, ["piecewise", "monolithic"], [piece_report.mean, mono_report.mean], piece_report.floors)
    model.save(outdir / "piecewise.cdsm")
    from .ioutil import atomic_write_bytes

    atomic_write_bytes(outdir / "monolithic.cdnn", mono_net.to_bytes())
    _manifest(outdir / "manifest.json", "ablation", cfg, [], [json_path, csv_path, svg_path, outdir / "piecewise.cdsm", outdir / "monolithic.cdnn"])
    print(f"piecewise {piece_report.mean:.4f} vs monolithic {mono_report.mean:.4f} (ratio {result['error_ratio_mono_over_piecewise']:.3f})")
    return 0


ORACLE_DEFAULTS = {
    "generator": "cond_gaussian",
    "gen_params": {},
    "substeps_list": [2, 4, 8, 16],
    "k": 4096,
    "m": 4,
    "metric": "auto",
    "n_proj": 128,
    "horizon": math.log(1e4),
    "bins": 14,
    "integrator": "euler_maruyama",
    "delta0": 1.0,
    "seed": 0,
    "out": None,
}


def cmd_oracle_check(args) -> int:
    cfg = _resolve(ORACLE_DEFAULTS, args, "oracle-check", dict_keys=("gen_params",))
    if isinstance(cfg["substeps_list"], str):
        cfg["substeps_list"] = [int(v) for v in cfg["substeps_list"].split(",")]
    gen = _make_generator(cfg)
    if not gen.has_analytic_score:
        raise ValueError(f"generator {cfg['generator']!r} has no analytic score; use cond_gaussian or bimodal1d")
    outdir = Path(cfg["out"] or _default_outdir() / "oracle_check")
    cfg["out"] = str(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ou_schedule = ou.OUSchedule(kind="constant", delta0=cfg["delta0"])
    partition = score.TimePartition(horizon=cfg["horizon"], n_bins=cfg["bins"])

    def oracle_fn(y, x, t):
        return gen.analytic_score(x, y, ou_schedule, t)

    rows = []
    for substeps in cfg["substeps_list"]:
        s_cfg = sampler.SamplerConfig(substeps=int(substeps), integrator=cfg["integrator"], truncation=2.0 * gen.y_radius)

        def run(x, k, rng_):
            return sampler.sample(oracle_fn, x, k, gen.dim_y, partition, ou_schedule, s_cfg, rng_)

        report = metrics.expected_conditional_error(
            run, gen, cfg["m"], cfg["k"], np.random.default_rng([cfg["seed"], int(substeps)]), metric=cfg["metric"], n_proj=cfg["n_proj"]
        )
        rows.append({"substeps": int(substeps), "mean": report.mean, "stderr": report.stderr, "floor": report.noise_floor})
        print(f"substeps={substeps}: {report.metric} {report.mean:.4f} (floor {report.noise_floor:.4f})")
    json_path = outdir / "oracle.json"
    write_json(json_path, {"rows": rows, "generator": gen.describe(), "horizon": cfg["horizon"], "bins": cfg["bins"]})
    csv_path = outdir / "oracle.csv"
    lines = ["substeps,mean,stderr,floor"] + [f"{r['substeps']},{r['mean']!r},{r['stderr']!r},{r['floor']!r}" for r in rows]
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    svg_path = outdir / "oracle.svg"
    plots.substep_curve(svg_path, [r["substeps"] for r in rows], [r["mean"] for r in rows], floor=float(np.mean([r["floor"] for r in rows])))
    _manifest(outdir / "manifest.json", "oracle-check", cfg, [], [json_path, csv_path, svg_path])
    return 0


# -----------------------------------------------------------------------
# argument parsing
# -----------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="JSON config file or a previous manifest")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output file or directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffreg", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="draw a dataset from a synthetic generator")
    _add_common(p)
    p.add_argument("--generator", help="variant name")
    p.add_argument("--gen-params", dest="gen_params", action="append", metavar="K=V", help="generator parameter")
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--csv", action="store_const", const=True, help="also write a CSV copy")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train the piecewise conditional score model")
    _add_common(p)
    p.add_argument("--data", help="CDRG dataset path")
    p.add_argument("--mode", choices=["euclidean", "manifold"])
    p.add_argument("--alpha-x", dest="alpha_x", type=float)
    p.add_argument("--alpha-y", dest="alpha_y", type=float)
    p.add_argument("--intrinsic-x", dest="intrinsic_x", type=int)
    p.add_argument("--intrinsic-y", dest="intrinsic_y", type=int)
    p.add_argument("--const", dest="constants", action="append", metavar="K=V", help="schedule multiplier override")
    p.add_argument("--cap", dest="caps", action="append", metavar="K=V", help="schedule cap override")
    p.add_argument("--steps", type=int, help="optimizer steps per bin")
    p.add_argument("--batch", type=int)
    p.add_argument("--draws", type=int, help="perturbation draws per point per step")
    p.add_argument("--lr", type=float)
    p.add_argument("--time-sampling", dest="time_sampling", choices=["weighted", "uniform"])
    p.add_argument("--delta0", type=float, help="constant forward drift")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sample", help="sample the conditional law from a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--x", help="comma-separated covariate vector")
    p.add_argument("--k", type=int, help="number of samples")
    p.add_argument("--substeps", type=int)
    p.add_argument("--integrator", choices=["euler_maruyama", "exponential"])
    p.add_argument("--truncation", type=float, help="sup-norm truncation radius L")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("evaluate", help="estimate the expected conditional error of a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--generator")
    p.add_argument("--gen-params", dest="gen_params", action="append", metavar="K=V")
    p.add_argument("--m", type=int, help="number of evaluation covariates")
    p.add_argument("--k", type=int, help="samples per covariate")
    p.add_argument("--metric", choices=["auto", "w1_exact", "w1_sliced", "w1_1d", "tv"])
    p.add_argument("--n-proj", dest="n_proj", type=int)
    p.add_argument("--substeps", type=int)
    p.add_argument("--integrator", choices=["euler_maruyama", "exponential"])
    p.add_argument("--truncation", type=float)
    p.add_argument("--no-svg", dest="svg", action="store_const", const=False)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("rate-study", help="error-vs-n trend with fitted slope")
    _add_common(p)
    p.add_argument("--generator")
    p.add_argument("--gen-params", dest="gen_params", action="append", metavar="K=V")
    p.add_argument("--n-list", dest="n_list", help="comma-separated sample sizes")
    p.add_argument("--mode", choices=["euclidean", "manifold"])
    p.add_argument("--alpha-x", dest="alpha_x", type=float)
    p.add_argument("--alpha-y", dest="alpha_y", type=float)
    p.add_argument("--intrinsic-x", dest="intrinsic_x", type=int)
    p.add_argument("--intrinsic-y", dest="intrinsic_y", type=int)
    p.add_argument("--const", dest="constants", action="append", metavar="K=V")
    p.add_argument("--cap", dest="caps", action="append", metavar="K=V")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--time-sampling", dest="time_sampling", choices=["weighted", "uniform"])
    p.add_argument("--delta0", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--metric", choices=["auto", "w1_exact", "w1_sliced", "w1_1d", "tv"])
    p.add_argument("--n-proj", dest="n_proj", type=int)
    p.add_argument("--substeps", type=int)
    p.add_argument("--integrator", choices=["euler_maruyama", "exponential"])
    p.set_defaults(fn=cmd_rate_study)

    p = sub.add_parser("ablation", help="piecewise family vs one monolithic network at matched parameters")
    _add_common(p)
    p.add_argument("--generator")
    p.add_argument("--gen-params", dest="gen_params", action="append", metavar="K=V")
    p.add_argument("--n", type=int)
    p.add_argument("--mode", choices=["euclidean", "manifold"])
    p.add_argument("--alpha-x", dest="alpha_x", type=float)
    p.add_argument("--alpha-y", dest="alpha_y", type=float)
    p.add_argument("--intrinsic-x", dest="intrinsic_x", type=int)
    p.add_argument("--intrinsic-y", dest="intrinsic_y", type=int)
    p.add_argument("--const", dest="constants", action="append", metavar="K=V")
    p.add_argument("--cap", dest="caps", action="append", metavar="K=V")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--time-sampling", dest="time_sampling", choices=["weighted", "uniform"])
    p.add_argument("--delta0", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--metric", choices=["auto", "w1_exact", "w1_sliced", "w1_1d", "tv"])
    p.add_argument("--n-proj", dest="n_proj", type=int)
    p.add_argument("--substeps", type=int)
    p.add_argument("--integrator", choices=["euler_maruyama", "exponential"])
    p.set_defaults(fn=cmd_ablation)

    p = sub.add_parser("oracle-check", help="sampler correctness with the analytic score plugged in")
    _add_common(p)
    p.add_argument("--generator")
    p.add_argument("--gen-params", dest="gen_params", action="append", metavar="K=V")
    p.add_argument("--substeps-list", dest="substeps_list", help="comma-separated substep counts")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--metric", choices=["auto", "w1_exact", "w1_sliced", "w1_1d", "tv"])
    p.add_argument("--n-proj", dest="n_proj", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--bins", type=int)
    p.add_argument("--integrator", choices=["euler_maruyama", "exponential"])
    p.add_argument("--delta0", type=float)
    p.set_defaults(fn=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
