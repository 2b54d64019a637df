"""Command-line client for the grading service.

The CLI holds no numerics: every command is an HTTP call against either an
in-process instance of the service app (default) or a remote server given
with ``--server``.  Responses carry the artifacts inline; the CLI writes them
into the output directory (config ``output_dir``, overridable with ``-o`` or
the ``NVBMESH_OUTDIR`` environment variable) and exits 0 iff every enabled
verifier passed.
"""

from __future__ import annotations

import asyncio
import json
import os
import sys
from pathlib import Path

import click
import httpx

from .config import load_config


def _call(server: str | None, path: str, payload: dict) -> dict:
    async def _inproc():
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://nvbmesh", timeout=None) as client:
            return await client.post(path, json=payload)

    if server:
        resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
    else:
        resp = asyncio.run(_inproc())
    if resp.status_code != 200:
        try:
            detail = resp.json()
        except Exception:
            detail = {"detail": resp.text}
        click.echo(f"error ({resp.status_code}): {detail.get('detail', detail)}", err=True)
        if "residual_trace" in detail:
            click.echo(f"residual trace: {detail['residual_trace']}", err=True)
        sys.exit(2)
    return resp.json()


def _outdir(cfg_dir: str, override: str | None) -> Path:
    out = os.environ.get("NVBMESH_OUTDIR") or override or cfg_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_artifacts(artifacts: dict[str, str], outdir: Path) -> None:
    for name, content in artifacts.items():
        (outdir / name).write_text(content)
        click.echo(f"wrote {outdir / name}")


@click.group()
@click.option("--server", default=None, help="Base URL of a running service; in-process by default.")
@click.pass_context
def main(ctx, server):
    """Graded-mesh experiments: grade, converge, kellogg, export, verify, serve."""
    ctx.obj = {"server": server}


@main.command()
@click.option("-c", "--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--output-dir", default=None, help="Override the config output directory.")
@click.pass_context
def grade(ctx, config_path, output_dir):
    """Construct one graded mesh and run the built-in verifiers."""
    cfg = load_config(config_path)
    if cfg.delta is None:
        raise click.UsageError("grade needs 'delta' in the config")
    data = _call(ctx.obj["server"], "/grade", {"config": cfg.model_dump()})
    outdir = _outdir(cfg.output_dir, output_dir)
    _write_artifacts(data["artifacts"], outdir)
    stats = data["stats"]
    click.echo(
        f"leaves={stats['leaves']} growth={stats['growth']} K={stats['K']} "
        f"min_angle={stats['min_angle']:.6f}"
    )
    for name, rep in data["verifiers"].items():
        ok = rep if isinstance(rep, bool) else rep.get("ok")
        click.echo(f"verifier {name}: {'pass' if ok else 'FAIL'}")
    if not data["passed"]:
        click.echo(f"verification FAILED; see {outdir / 'size_lemma.csv'}", err=True)
        sys.exit(1)
    click.echo("all verifiers passed")


@main.command()
@click.option("-c", "--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--output-dir", default=None)
@click.pass_context
def converge(ctx, config_path, output_dir):
    """Run a delta sweep (or uniform baseline) and fit the error-decay slope."""
    cfg = load_config(config_path)
    if cfg.mode == "graded" and (not cfg.deltas or len(cfg.deltas) < 4):
        raise click.UsageError("converge needs 'deltas' with at least 4 decreasing values")
    data = _call(ctx.obj["server"], "/converge", {"config": cfg.model_dump()})
    outdir = _outdir(cfg.output_dir, output_dir)
    _write_artifacts(data["artifacts"], outdir)
    slope = data["slope"]
    click.echo(f"mode={cfg.mode} slope={slope:.4f} threshold={data['threshold']:.4f}")
    for row in data["rows"]:
        click.echo(
            f"  delta={row['delta']:.5g} N={row['cardinality']} "
            f"error={row['error_total']:.6e}"
        )
    if not data["passed"]:
        click.echo("slope threshold NOT met", err=True)
        sys.exit(1)
    click.echo("pass")


@main.command()
@click.argument("gamma", type=float)
@click.pass_context
def kellogg(ctx, gamma):
    """Solve the checkerboard-interface parameters for exponent GAMMA."""
    if not (0.0 < gamma < 2.0):
        raise click.UsageError("gamma must satisfy 0 < gamma < 2")
    data = _call(ctx.obj["server"], "/kellogg", {"gamma": gamma})
    click.echo(
        f"R={data['ratio']:.7g} rho={data['rho']:.10g} sigma={data['sigma']:.7g} "
        f"residual={data['residual']:.3e} iterations={data['iterations']}"
    )
    click.echo(f"mu seam gaps: {['%.2e' % g for g in data['mu_seam_gaps']]}")
    click.echo("singular-term config block:")
    click.echo(json.dumps(data["term_config"], indent=2))


@main.command()
@click.argument("mesh_path", type=click.Path(exists=True))
@click.option("--format", "fmt", default="vtk", help="Target format: vtk or text.")
@click.option("-o", "--output", default=None, type=click.Path(), help="Output file path.")
@click.pass_context
def export(ctx, mesh_path, fmt, output):
    """Convert a saved mesh file (text round trip or legacy VTK)."""
    if fmt not in ("vtk", "text"):
        raise click.UsageError(f"unknown format {fmt!r}; expected 'vtk' or 'text'")
    mesh_text = Path(mesh_path).read_text()
    data = _call(ctx.obj["server"], "/export", {"mesh_text": mesh_text, "format": fmt})
    if output is None:
        suffix = ".vtk" if fmt == "vtk" else ".txt"
        output = str(Path(mesh_path).with_suffix(suffix + ".out" if fmt == "text" else suffix))
    Path(output).write_text(data["content"])
    click.echo(f"wrote {output}")


@main.command()
@click.argument("mesh_path", type=click.Path(exists=True))
@click.option("-c", "--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--ledger", "ledger_path", default=None, type=click.Path(exists=True),
              help="Saved ledger CSV to re-check the cardinality bounds.")
@click.pass_context
def verify(ctx, mesh_path, config_path, ledger_path):
    """Re-run the lemma verifiers on a saved mesh (+ optional ledger)."""
    cfg = load_config(config_path)
    payload = {
        "mesh_text": Path(mesh_path).read_text(),
        "config": cfg.model_dump(),
        "ledger_csv": Path(ledger_path).read_text() if ledger_path else None,
    }
    data = _call(ctx.obj["server"], "/verify", payload)
    for name, rep in data["reports"].items():
        ok = rep if isinstance(rep, bool) else rep.get("ok")
        click.echo(f"{name}: {'pass' if ok else 'FAIL'}")
    sys.exit(0 if data["passed"] else 1)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the service with uvicorn."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
