"""Command-line surface: explain one row, run the stability benchmark,
or serve the HTTP API.

Local mode calls the same handlers the service uses; --server posts the
request to a running service instead, so outputs are identical either
way. Exit codes: 2 config, 3 data, 4 model, 5 numerical.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import ConlexError


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}")


def _echo_seed(out: dict):
    if out.get("auto_seed"):
        click.echo(f"seed: {out['seed']}", err=True)


def _write(path: Path, content: str):
    path.write_text(content)
    click.echo(f"wrote {path}", err=True)


@click.group()
def cli():
    """Contrastive local explanations for black-box classifiers."""


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--label", required=True, help="label column name or index")
@click.option("--index", required=True, type=int, help="row to explain")
@click.option("--method", default="ce-climax", type=click.Choice(["lime", "l-climax", "ce-climax"]))
@click.option("--balance", default="gmm", type=click.Choice(["none", "ros", "gmm"]))
@click.option("--influence", is_flag=True, default=False)
@click.option("--keep-fraction", default=0.7, type=float, show_default=True)
@click.option("--n-prime", default=1000, type=int, show_default=True)
@click.option("--k", default=5, type=int, show_default=True)
@click.option("--lambda", "lam", default=None, type=float, help="ridge/L2 strength")
@click.option("--kernel-width", default=None, type=float)
@click.option("--seed", default=None, type=int, help="omit to draw one (printed to stderr)")
@click.option("--blackbox-cmd", default=None, help="external probability host command")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
@click.option("--server", default=None, help="base URL of a running service")
def explain(data_path, label, index, method, balance, influence, keep_fraction,
            n_prime, k, lam, kernel_width, seed, blackbox_cmd, out_dir, server):
    """Explain one dataset row; document to stdout or --out directory."""
    label = _coerce_label(label)
    if server:
        payload = {
            "data_path": data_path, "label": label, "index": index,
            "method": method, "balance": balance, "influence": influence,
            "keep_fraction": keep_fraction, "n_prime": n_prime, "k": k,
            "lambda": lam, "kernel_width": kernel_width, "seed": seed,
            "blackbox_cmd": blackbox_cmd,
        }
        body = _post(server, "/explain", payload)
        out = {"document": body["document"], "svg": body["svg"],
               "seed": body["seed"], "auto_seed": seed is None}
    else:
        from .service import handlers

        out = handlers.run_explain(
            data_path=data_path, label=label, index=index, method=method,
            balance=balance, influence=influence, keep_fraction=keep_fraction,
            n_prime=n_prime, k=k, lam=lam, kernel_width=kernel_width,
            seed=seed, blackbox_cmd=blackbox_cmd,
        )
    _echo_seed(out)
    if out_dir:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        _write(out_path / "explanation.txt", out["document"])
        _write(out_path / "explanation.svg", out["svg"])
    else:
        click.echo(out["document"], nl=False)


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--label", required=True)
@click.option("--methods", default="lime,ce-climax-gmm", show_default=True,
              help="comma list of method tokens, e.g. lime,ce-climax-gmm-if")
@click.option("--n-prime", default="500,1000", show_default=True,
              help="comma list of surrogate counts")
@click.option("--repeats", default=20, type=int, show_default=True)
@click.option("--index-count", default=10, type=int, show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--jobs", default=1, type=int, show_default=True)
@click.option("--blackbox-cmd", default=None)
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
@click.option("--server", default=None, help="base URL of a running service")
def stability(data_path, label, methods, n_prime, repeats, index_count, seed,
              jobs, blackbox_cmd, out_dir, server):
    """Repeated-explanation consistency benchmark; CSV + SVG per dataset."""
    label = _coerce_label(label)
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    n_prime_grid = _parse_int_list(n_prime)
    if server:
        payload = {
            "data_path": data_path, "label": label, "methods": method_list,
            "n_prime": n_prime_grid, "repeats": repeats,
            "index_count": index_count, "seed": seed, "jobs": jobs,
            "blackbox_cmd": blackbox_cmd,
        }
        body = _post(server, "/stability", payload)
        out = {"csv": body["csv"], "document": body["document"], "svg": body["svg"],
               "seed": body["seed"], "auto_seed": seed is None,
               "dataset_name": body["dataset"]}
    else:
        from .service import handlers

        res = handlers.run_stability(
            data_path=data_path, label=label, methods=method_list,
            n_prime_grid=n_prime_grid, repeats=repeats, index_count=index_count,
            seed=seed, jobs=jobs, blackbox_cmd=blackbox_cmd,
        )
        out = {**res, "dataset_name": res["dataset"].name}
    _echo_seed(out)
    if out_dir:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        _write(out_path / "stability.csv", out["csv"])
        _write(out_path / "stability.txt", out["document"])
        _write(out_path / f"stability_{out['dataset_name']}.svg", out["svg"])
    else:
        click.echo(out["csv"], nl=False)
    click.echo(out["document"], err=True, nl=False)


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, type=int, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


def _coerce_label(label):
    # a purely numeric --label means a column position
    return int(label) if isinstance(label, str) and label.lstrip("-").isdigit() else label


def _post(server: str, route: str, payload: dict) -> dict:
    import httpx

    from .errors import ModelUnavailable

    try:
        resp = httpx.post(server.rstrip("/") + route, json=payload, timeout=600.0)
    except httpx.HTTPError as exc:
        raise ModelUnavailable(f"service request failed: {exc}") from exc
    if resp.status_code != 200:
        try:
            body = resp.json()
        except ValueError:
            body = {}
        exc_type = _REMOTE_ERRORS.get(body.get("error"), ConlexError)
        err = exc_type(body.get("message", f"service returned {resp.status_code}"))
        if "exit_code" in body:
            err.exit_code = body["exit_code"]
        raise err
    return resp.json()


def _remote_error_index():
    from . import errors

    return {
        name: cls
        for name, cls in vars(errors).items()
        if isinstance(cls, type) and issubclass(cls, ConlexError)
    }


_REMOTE_ERRORS = _remote_error_index()


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except ConlexError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    return 0


if __name__ == "__main__":
    main()
