"""Command-line entry points: generate, train, evaluate, simulate, serve.

Option precedence is flags > CATBN_* environment variables > --config
JSON file (loaded into click's default map).  All numeric output comes
from the library modules; the CLI only parses, wires, and prints.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .dataset import generate_synthetic, load_csv, save_csv, training_observations
from .evaluation import EvalConfig, cross_validate, emit_report, simulate_student
from .learning import EmConfig, em_fit, export_ll_trace
from .network import load_network, save_network
from .zoo import (
    build_model,
    demo_blueprint,
    expert_arity_notes,
    load_blueprint,
    spec_by_id,
)

CONTEXT = {"max_content_width": 80, "terminal_width": 80, "auto_envvar_prefix": "CATBN"}

_ERRORS = (ValueError, OSError)  # all package errors subclass ValueError


def _load_bp(path: str | None):
    return load_blueprint(path) if path else demo_blueprint()


def _config_callback(ctx: click.Context, param, value):
    if value:
        defaults = json.loads(Path(value).read_text())
        ctx.default_map = {**defaults, **(ctx.default_map or {})}
    return value


def config_option(f):
    return click.option(
        "--config",
        type=click.Path(exists=True, dir_okay=False),
        callback=_config_callback,
        expose_value=False,
        is_eager=True,
        help="JSON file with default option values.",
    )(f)


@click.group(context_settings=CONTEXT)
def cli():
    """Adaptive testing with Bayesian network student models."""


@cli.command()
@config_option
@click.option("--blueprint", type=click.Path(exists=True), help="Blueprint JSON (default: packaged demo).")
@click.option("--truth", type=click.Path(exists=True), help="Ground-truth network JSON to sample from.")
@click.option("--model", help="Alternatively: build this catalogue model with random seeded CPTs.")
@click.option("--students", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output dataset CSV.")
@click.option("--sidecar", type=click.Path(), help="Where to keep the sampled latent skills.")
def generate(blueprint, truth, model, students, seed, out, sidecar):
    """Sample a synthetic answer dataset from a network."""
    bp = _load_bp(blueprint)
    if truth:
        net = load_network(truth)
    elif model:
        spec = spec_by_id(model)
        net = build_model(spec, bp)
        rng = np.random.default_rng(seed)
        net = net.replace_cpts(
            {
                c.child: rng.dirichlet(np.ones(c.table.shape[1]), size=c.table.shape[0])
                for c in net.cpts
            }
        )
    else:
        raise click.UsageError("pass --truth NET.json or --model ID")
    data, side = generate_synthetic(net, bp, students, seed)
    save_csv(data, out)
    click.echo(f"wrote {data.n_rows} students to {out} (scale: {data.scale})")
    if sidecar:
        side.to_csv(sidecar, index=False)
        click.echo(f"wrote latent skills to {sidecar}")


def em_options(f):
    for opt in (
        click.option("--max-iterations", type=int, default=100, show_default=True),
        click.option("--ll-tolerance", type=float, default=1e-4, show_default=True),
        click.option("--pseudocount", type=float, default=0.0, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
    ):
        f = opt(f)
    return f


@cli.command()
@config_option
@click.option("--model", required=True, help="Catalogue id (b2, b3+, n3o, ...).")
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--blueprint", type=click.Path(exists=True))
@click.option("--scale", type=click.Choice(["points", "boolean"]), default="points", show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output network JSON.")
@click.option("--ll-trace", type=click.Path(), help="Also write the convergence trace CSV.")
@em_options
def train(model, data_path, blueprint, scale, out, ll_trace, max_iterations, ll_tolerance, pseudocount, seed):
    """Fit one model with EM and save the network."""
    bp = _load_bp(blueprint)
    spec = spec_by_id(model)
    if spec.scale != scale:
        raise click.UsageError(f"model {model} expects --scale {spec.scale}")
    data = load_csv(data_path, bp, scale=scale)
    structure = build_model(spec, bp)
    for note in expert_arity_notes(bp) if spec.skill_count > 1 else []:
        click.echo(f"note: {note}", err=True)
    cfg = EmConfig(max_iterations=max_iterations, ll_tolerance=ll_tolerance,
                   pseudocount=pseudocount, seed=seed)
    result = em_fit(structure, training_observations(data, spec.observed_score, structure), cfg)
    save_network(result.network, out)
    if ll_trace:
        export_ll_trace(result, ll_trace)
    status = "converged" if result.converged else "iteration cap reached"
    click.echo(
        f"fitted {model} on {data.n_rows} rows: {result.iterations_used} iterations "
        f"({status}), final loglik {result.ll_trace[-1]:.4f} -> {out}"
    )


@cli.command()
@config_option
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--blueprint", type=click.Path(exists=True))
@click.option("--models", required=True, help="Comma-separated catalogue ids, e.g. b2,b3.")
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--scale", type=click.Choice(["points", "boolean"]), default="points", show_default=True)
@click.option("--max-steps", type=int, help="Stop each simulated test after this many questions.")
@click.option("--out", type=click.Path(), required=True, help="Report directory.")
@click.option("--cache/--no-cache", default=True, show_default=True,
              help="Cache per-fold fitted networks under OUT/cache.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel fold workers.")
@em_options
def evaluate(data_path, blueprint, models, folds, scale, max_steps, out, cache, jobs,
             max_iterations, ll_tolerance, pseudocount, seed):
    """Cross-validate model structures and write the report CSVs."""
    bp = _load_bp(blueprint)
    data = load_csv(data_path, bp, scale=scale)
    em = EmConfig(max_iterations=max_iterations, ll_tolerance=ll_tolerance,
                  pseudocount=pseudocount, seed=seed)
    cfg = EvalConfig(
        specs=tuple(m.strip() for m in models.split(",") if m.strip()),
        folds=folds,
        seed=seed,
        max_steps=max_steps,
        em=em,
        cache_dir=Path(out) / "cache" if cache else None,
        n_jobs=jobs,
    )
    report = cross_validate(data, bp, cfg)
    files = emit_report(report, out)
    for mid, res in report.models.items():
        last = len(res.sr) - 1
        click.echo(
            f"{mid}: SR0={res.sr[0]:.3f} SR{last - 1}={res.sr[last - 1]:.3f} "
            f"azt={res.azt:.2f} as={res.as_:.4f}"
            + (f"  [incomplete folds: {res.incomplete_folds}]" if res.incomplete_folds else "")
        )
    click.echo(f"wrote {len(files)} files to {out}")


@cli.command()
@config_option
@click.option("--network", type=click.Path(exists=True), required=True, help="Fitted network JSON.")
@click.option("--blueprint", type=click.Path(exists=True))
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--student", required=True, help="student_id of the record to replay.")
@click.option("--scale", type=click.Choice(["points", "boolean"]), default="points", show_default=True)
@click.option("--max-steps", type=int)
@click.option("--out", type=click.Path(), help="Transcript JSONL (default: stdout).")
def simulate(network, blueprint, data_path, student, scale, max_steps, out):
    """Replay one student's answers adaptively; print the transcript."""
    bp = _load_bp(blueprint)
    net = load_network(network)
    data = load_csv(data_path, bp, scale=scale)
    answers = data.answers_of(student)
    info = {k: v for k, v in data.info_of(student).items() if k in net}
    sr, asked, session = simulate_student(net, answers, info, max_steps)
    lines = [json.dumps(rec.to_json_dict()) for rec in session.transcript]
    text = "\n".join(lines) + ("\n" if lines else "")
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {len(lines)} steps to {out}", err=True)
    else:
        click.echo(text, nl=False)


@cli.command()
@config_option
@click.option("--blueprint", type=click.Path(exists=True))
@click.option("--model", "model_specs", multiple=True, required=True,
              help="id=network.json; repeat for several models.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--session-log", type=click.Path(), help="Append-only JSONL event log.")
@click.option("--session-ttl", type=float, help="Expire idle sessions after this many seconds.")
def serve(blueprint, model_specs, host, port, session_log, session_ttl):
    """Serve the adaptive-testing HTTP API."""
    import uvicorn

    from .server import create_app

    bp = _load_bp(blueprint)
    models = {}
    for spec in model_specs:
        if "=" not in spec:
            raise click.UsageError("--model expects ID=path/to/network.json")
        mid, path = spec.split("=", 1)
        models[mid] = load_network(path)
    app = create_app(
        models, bp,
        session_log=Path(session_log) if session_log else None,
        session_ttl=session_ttl,
    )
    click.echo(f"serving {sorted(models)} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.ClickException as err:
        err.show()
        return err.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 130
    except _ERRORS as err:
        click.echo(f"error: {err}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
