"""Command line entry points.

    provenance ingest FILE --collection ai
    provenance classify INPUT [--report out.csv]
    provenance bench --images DIR --out grid.csv
    provenance gas uint256 -n 9000 --seed 7
    provenance ledger-verify
    provenance serve --bind 127.0.0.1:8031

Global flags: --root (data directory), --mode (framework), --config
(JSON file with the same keys; explicit flags win). Exit codes: 0 ok,
1 usage error, 2 data/validation error, 3 ledger integrity failure.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .classifier import write_report
from .errors import LedgerCorruptError, ValidationError
from .interchange import MAGIC, read_embedding_file
from .ledger import format_gas_table, simulate_gas, verify_chain
from .perturb import (
    Collection,
    default_perturbations,
    format_benchmark_detail,
    format_benchmark_grid,
    run_robustness_benchmark,
    BenchmarkRow,
)
from .pipeline import DEFAULT_NAMESPACE, Engine, FrameworkMode, LEDGER_DIR, vector_from_json_obj

_MODES = [m.value for m in FrameworkMode]


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read config {path}: {e}") from None
    if not isinstance(cfg, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return cfg


def _effective(ctx: click.Context, name: str, flag_value, default):
    """Flag if given on the command line, else config value, else default."""
    src = ctx.get_parameter_source(name)
    if src is not None and src.name == "COMMANDLINE":
        return flag_value
    return ctx.obj["config"].get(name, default)


@click.group()
@click.option("--root", default="provenance-data", show_default=True,
              help="Data directory holding collections and ledgers.")
@click.option("--mode", type=click.Choice(_MODES), default=FrameworkMode.HYBRID.value,
              show_default=True, help="Framework mode.")
@click.option("--namespace", default=DEFAULT_NAMESPACE, show_default=True,
              help="Namespace queried and ingested into.")
@click.option("--config", "config_path", default=None, help="JSON config file; flags override it.")
@click.option("--seed", type=int, default=None, help="Seed for anything randomized.")
@click.pass_context
def cli(ctx, root, mode, namespace, config_path, seed):
    ctx.obj = {"config": _load_config(config_path)}
    root = _effective(ctx, "root", root, "provenance-data")
    mode = _effective(ctx, "mode", mode, FrameworkMode.HYBRID.value)
    namespace = _effective(ctx, "namespace", namespace, DEFAULT_NAMESPACE)
    seed = _effective(ctx, "seed", seed, None)
    ctx.obj["engine"] = Engine(root, FrameworkMode(mode), namespace=namespace, gas_seed=seed)
    ctx.obj["seed"] = seed


@cli.command()
@click.argument("embedding_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--collection", required=True, help="Target collection (created on first ingest).")
@click.option("--namespace", default=None, help="Override the global namespace.")
@click.pass_context
def ingest(ctx, embedding_file, collection, namespace):
    """Load an embedding file into a collection (and ledger, mode permitting)."""
    engine: Engine = ctx.obj["engine"]
    count = engine.ingest(embedding_file, collection, namespace)
    click.echo(f"ingested {count} records into {collection!r}")


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--report", "report_path", default=None,
              help="Also write the prediction CSV (not available in hash_only mode).")
@click.option("--out", "out_path", default=None, help="Write JSONL responses here instead of stdout.")
@click.pass_context
def classify(ctx, input_path, report_path, out_path):
    """Classify an embedding file, or a single JSON vector {dim, components}."""
    engine: Engine = ctx.obj["engine"]
    if report_path and engine.mode is FrameworkMode.HASH_ONLY:
        raise click.UsageError("--report needs similarity scores; hash_only mode has none")

    with open(input_path, "rb") as f:
        is_embedding_file = f.read(4) == MAGIC
    if is_embedding_file:
        inputs = [
            (vec, meta.source_name or meta.id, meta.label)
            for meta, vec in read_embedding_file(input_path)
        ]
    else:
        obj = json.loads(Path(input_path).read_text(encoding="utf-8"))
        vec, source_name = vector_from_json_obj(obj)
        inputs = [(vec, source_name or "query", None)]  # true label unknown

    responses, rows = [], []
    for vec, source_name, true_label in inputs:
        resp, row = engine.classify_record(vec, source_name=source_name, true_label=true_label)
        responses.append(resp.to_dict())
        if row is not None:
            rows.append(row)

    lines = "\n".join(json.dumps(r) for r in responses) + "\n"
    if out_path:
        Path(out_path).write_text(lines, encoding="utf-8")
    else:
        click.echo(lines, nl=False)
    if report_path:
        write_report(rows, report_path)
        click.echo(f"report written to {report_path}", err=True)


@cli.command()
@click.option("--images", "images_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Image corpus; toy-embedded on the fly.")
@click.option("--from-files", nargs=2, type=click.Path(exists=True, dir_okay=False), default=None,
              help="Pre-computed pair: ORIGINALS.emb MODIFIED.emb (rows grouped by namespace).")
@click.option("--out", "out_path", default=None, help="Write the grid CSV here.")
@click.option("--detail", "detail_path", default=None, help="Write per-item match detail here.")
@click.pass_context
def bench(ctx, images_dir, from_files, out_path, detail_path):
    """Run the perturbation robustness benchmark."""
    from .perturb import benchmark_corpus

    seed = ctx.obj["seed"] or 0
    if (images_dir is None) == (from_files is None):
        raise click.UsageError("pass exactly one of --images or --from-files")

    if images_dir:
        images = _load_corpus(Path(images_dir))
        rows, details = benchmark_corpus(images, default_perturbations(seed))
    else:
        rows, details = _bench_from_files(*from_files)

    grid = format_benchmark_grid(rows)
    click.echo(grid, nl=False)
    if out_path:
        Path(out_path).write_text(grid, encoding="utf-8")
    if detail_path:
        Path(detail_path).write_text(format_benchmark_detail(details), encoding="utf-8")


def _load_corpus(root: Path) -> dict[str, "np.ndarray"]:
    from .interchange import image_from_bytes

    images = {}
    for p in sorted(root.iterdir()):
        if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"):
            images[p.name] = image_from_bytes(p.read_bytes())
    if not images:
        raise ValidationError(f"no images found under {root}")
    return images


def _bench_from_files(originals_path: str, modified_path: str):
    originals = read_embedding_file(originals_path)
    if not originals:
        raise ValidationError(f"{originals_path} holds no records")
    dim = originals[0][1].size
    col = Collection(Path("."), "bench-originals", originals[0][0].label, dim=dim)
    col.upsert_many("originals", originals)

    groups: dict[str, list] = {}
    for meta, vec in read_embedding_file(modified_path):
        groups.setdefault(meta.namespace, []).append((meta, vec))
    rows, details = [], {}
    for name in groups:
        results, accuracy = run_robustness_benchmark(col, groups[name])
        rows.append(BenchmarkRow(name, len(results), sum(r.correct for r in results), accuracy))
        details[name] = results
    return rows, details


@cli.command()
@click.argument("gas_mode", type=click.Choice(["uint256", "string"]))
@click.option("-n", "count", type=int, default=9000, show_default=True,
              help="Number of simulated store transactions.")
@click.option("--out", "out_path", default=None, help="Write the statistic table here.")
@click.pass_context
def gas(ctx, gas_mode, count, out_path):
    """Simulate storage gas costs and print the statistic table."""
    _, summary = simulate_gas(gas_mode, count, seed=ctx.obj["seed"])
    table = format_gas_table(summary)
    click.echo(table, nl=False)
    if out_path:
        Path(out_path).write_text(table, encoding="utf-8")


@cli.command("ledger-verify")
@click.argument("names", nargs=-1)
@click.pass_context
def ledger_verify(ctx, names):
    """Recompute the hash chains of the named (default: all) ledgers."""
    engine: Engine = ctx.obj["engine"]
    ledger_dir = engine.root / LEDGER_DIR
    paths = [ledger_dir / f"{n}.lgr" for n in names] if names else sorted(ledger_dir.glob("*.lgr"))
    if not paths:
        raise ValidationError(f"no ledgers under {ledger_dir}")
    failures = []
    for path in paths:
        if not path.exists():
            raise ValidationError(f"no such ledger {path}")
        verdict = verify_chain(path)
        status = "valid" if verdict.ok else f"CORRUPT ({verdict.reason} at entry {verdict.first_bad_index})"
        click.echo(f"{path.stem}: {status}")
        if not verdict.ok:
            failures.append(path.stem)
    if failures:
        raise LedgerCorruptError(f"chain verification failed for: {', '.join(failures)}")


@cli.command()
@click.option("--bind", default="127.0.0.1:8031", show_default=True, help="host:port to listen on.")
@click.pass_context
def serve(ctx, bind):
    """Serve POST /classify and GET /health until interrupted."""
    from .service import serve_forever

    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise click.UsageError(f"--bind must look like host:port, got {bind!r}")
    serve_forever(ctx.obj["engine"], host, int(port))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except LedgerCorruptError as e:
        click.echo(f"ledger integrity failure: {e}", err=True)
        return 3
    except ValidationError as e:
        click.echo(f"error: {e}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
