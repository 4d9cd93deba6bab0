"""Command-line entry points for the full pipeline.

Every subcommand takes an optional JSON --config file; individual flags
override config values. Outputs are CSV tables plus a JSON run manifest in
the output directory.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict
from pathlib import Path

import click

from . import __version__, dsl, tasks
from .datagen import GenConfig, build_dataset, load_split
from .model.training import TrainConfig, train


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _write_manifest(out_dir: Path, command: str, params: dict,
                    outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "params": params,
        "outputs": outputs,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _print_summary(table, group_keys=("method", "target")) -> None:
    for entry in table.summary(group_keys):
        label = " / ".join(str(entry[k]) for k in group_keys)
        click.echo(f"  {label}: {entry['mean']:.3f} ({entry['std']:.3f}) n={entry['n']}")


@click.group()
def main() -> None:
    """Program synthesis from reward over a Karel gridworld."""


@main.command("gen-data")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--train-size", type=int, default=None)
@click.option("--val-size", type=int, default=None)
@click.option("--test-size", type=int, default=None)
@click.option("--jobs", type=int, default=1)
def gen_data(config_path, seed, out_dir, train_size, val_size, test_size, jobs):
    """Build the random-program rollout dataset."""
    overrides = _load_config(config_path)
    for key, value in (("train_size", train_size), ("val_size", val_size),
                       ("test_size", test_size)):
        if value is not None:
            overrides[key] = value
    cfg = GenConfig(**overrides)
    manifest = build_dataset(cfg, seed, out_dir, n_jobs=jobs)
    _write_manifest(Path(out_dir), "gen-data", {"config": asdict(cfg), "seed": seed},
                    ["manifest.json", "train.txt", "val.txt", "test.txt"])
    click.echo(json.dumps(manifest["counts"]))


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--rounds", type=int, default=None)
@click.option("--scale", type=click.Choice(["desk", "paper"]), default="desk")
def train_cmd(config_path, seed, data_dir, out_dir, rounds, scale):
    """Train the program embedding model on a built dataset."""
    overrides = _load_config(config_path)
    if rounds is not None:
        overrides["rounds"] = rounds
    overrides["seed"] = seed
    if scale == "paper":
        from .model.training import paper_scale_config
        cfg = paper_scale_config(**overrides)
    else:
        cfg = TrainConfig(**overrides)
    train_split = load_split(data_dir, "train")
    val_split = load_split(data_dir, "val")
    summary = train(cfg, train_split, val_split, out_dir)
    _write_manifest(Path(out_dir), "train", {"config": asdict(cfg), "data": str(data_dir)},
                    ["checkpoint.ks", "training_log.csv"])
    click.echo(json.dumps(summary["best"]))


def _seed_range(seeds: int, seed: int) -> list[int]:
    return [seed + i for i in range(seeds)]


@main.command("reconstruct")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0)
@click.option("--seeds", type=int, default=5)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--method", type=click.Choice(["cem", "random"]), default="cem")
@click.option("--max-iters", type=int, default=None)
def reconstruct(config_path, checkpoint, seed, seeds, out_dir, method, max_iters):
    """Search for programs matching the reference target behaviors."""
    from .experiments import run_reconstruct
    overrides = _load_config(config_path)
    if max_iters is not None:
        overrides["max_iters"] = max_iters
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = run_reconstruct(checkpoint, _seed_range(seeds, seed),
                            out_dir=out, method=method, **overrides)
    table.write_csv(out / "reconstruct.csv")
    _write_manifest(out, "reconstruct",
                    {"checkpoint": checkpoint, "seeds": seeds, **overrides},
                    ["reconstruct.csv"])
    _print_summary(table)


@main.command("solve")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0)
@click.option("--seeds", type=int, default=5)
@click.option("--task", "task_kinds", multiple=True,
              type=click.Choice(list(tasks.KINDS)))
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--max-iters", type=int, default=None)
def solve(config_path, checkpoint, seed, seeds, task_kinds, out_dir, max_iters):
    """CEM search for task-solving programs."""
    from .experiments import run_solve
    overrides = _load_config(config_path)
    if max_iters is not None:
        overrides["max_iters"] = max_iters
    kinds = list(task_kinds) or list(tasks.KINDS)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = run_solve(checkpoint, kinds, _seed_range(seeds, seed),
                      out_dir=out, **overrides)
    table.write_csv(out / "solve.csv")
    _write_manifest(out, "solve", {"checkpoint": checkpoint, "tasks": kinds,
                                   "seeds": seeds, **overrides}, ["solve.csv"])
    _print_summary(table)


@main.command("generalize")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--programs", "programs_json", type=click.Path(exists=True),
              default=None, help="JSON {task: program text}; defaults to the "
                                 "packaged reference solutions")
def generalize(seed, out_dir, programs_json):
    """Zero-shot evaluation of programs on 100x100 grids."""
    from .experiments import run_generalize
    programs = None
    if programs_json:
        raw = json.loads(Path(programs_json).read_text())
        programs = {k: dsl.parse(v) for k, v in raw.items()}
        kinds = list(programs)
    else:
        from .experiments import GENERALIZE_KINDS
        kinds = list(GENERALIZE_KINDS)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = run_generalize(programs, kinds, base_seed=seed)
    table.write_csv(out / "generalize.csv")
    _write_manifest(out, "generalize", {"seed": seed, "tasks": kinds},
                    ["generalize.csv"])
    _print_summary(table, ("target", "grid"))


@main.command("unseen-config")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--task", "kind", type=click.Choice(["TopOff", "Harvester"]),
              required=True)
@click.option("--seed", type=int, default=0)
@click.option("--seeds", type=int, default=3)
@click.option("--fractions", default="1.0,0.75,0.5,0.25,0.1,0.05")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--max-iters", type=int, default=None)
def unseen_config(config_path, checkpoint, kind, seed, seeds, fractions,
                  out_dir, max_iters):
    """Search on a fraction of task configurations, evaluate on all."""
    from .experiments import run_unseen_config
    overrides = _load_config(config_path)
    if max_iters is not None:
        overrides["max_iters"] = max_iters
    fracs = [float(x) for x in fractions.split(",")]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = run_unseen_config(checkpoint, kind, fracs,
                              _seed_range(seeds, seed), **overrides)
    table.write_csv(out / "unseen_config.csv")
    _write_manifest(out, "unseen-config",
                    {"checkpoint": checkpoint, "task": kind,
                     "fractions": fracs, "seeds": seeds, **overrides},
                    ["unseen_config.csv"])
    _print_summary(table, ("target", "fraction"))


@main.command("interpolate")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--program-a", required=True, help="program text or corpus name")
@click.option("--program-b", required=True, help="program text or corpus name")
@click.option("--steps", type=int, default=8)
def interpolate(checkpoint, program_a, program_b, steps):
    """Decode evenly spaced latent interpolations between two programs."""
    from .experiments import corpus_names, load_program, run_interpolate
    def resolve(text: str) -> dsl.Program:
        if text in corpus_names():
            return load_program(text)
        return dsl.parse(text)
    programs = run_interpolate(checkpoint, resolve(program_a),
                               resolve(program_b), steps)
    for i, program in enumerate(programs):
        click.echo(f"{i}\t{dsl.to_text(program)}")


@main.command("export-latents")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--split", default="train",
              type=click.Choice(["train", "val", "test"]))
@click.option("--out", "out_csv", type=click.Path(), required=True)
def export_latents_cmd(checkpoint, data_dir, split, out_csv):
    """Write every split program's latent mean vector to CSV."""
    from .experiments import export_latents
    count = export_latents(checkpoint, data_dir, split, out_csv)
    click.echo(f"wrote {count} rows to {out_csv}")


@main.command("serve")
@click.option("--checkpoint", type=click.Path(exists=True), default=None)
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="directory with the built web UI")
def serve(checkpoint, port, host, static_dir):
    """Serve the HTTP API (and optionally the web UI)."""
    import uvicorn
    from .server import create_app
    app = create_app(checkpoint, static_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
