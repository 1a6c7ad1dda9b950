"""Command-line interface.

Commands:
  insight hdc <dataset>              generate and print the schema context
  insight ask <dataset> "<question>" one-shot question answering
  insight serve                      run the HTTP service
  insight record --cassette <file> <subcommand...>
                                     re-run a subcommand in record mode
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import catalog
from .config import ServiceConfig, load_config
from .errors import InsightError
from .gateway import GatewayConfig
from .service import InsightService

logger = logging.getLogger(__name__)


def _load(config_path: str | None) -> ServiceConfig:
    if config_path:
        return load_config(config_path)
    return ServiceConfig(gateway=GatewayConfig(models=["default-model"]))


def _resolve_dataset(service: InsightService, dataset: str) -> str:
    """Accept either a registered dataset name or a path to a database
    file, registering the file under its stem on first use."""
    known = {d["name"] for d in service.store.list_datasets()}
    if dataset in known:
        return dataset
    path = Path(dataset)
    if path.exists():
        name = path.stem
        if name not in known:
            service.register_dataset(str(path), name)
        return name
    raise InsightError(
        f"{dataset!r} is neither a registered dataset nor a database file"
    )


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--verbose", is_flag=True, default=False)
@click.pass_context
def main(ctx: click.Context, config_path: str | None, verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    ctx.ensure_object(dict)
    if "config" not in ctx.obj:
        ctx.obj["config"] = _load(config_path)


@main.command()
@click.argument("dataset")
@click.option("--out", type=click.Path(), default=None, help="Write the document here.")
@click.pass_context
def hdc(ctx: click.Context, dataset: str, out: str | None) -> None:
    """Generate (or load) the schema context for DATASET and print it."""
    service = InsightService(ctx.obj["config"])
    try:
        name = _resolve_dataset(service, dataset)
        runtime = service.ensure_context(name)
        assert runtime.context is not None
        document = catalog.context_document(runtime.context)
        text = json.dumps(document, indent=2, ensure_ascii=False)
        if out:
            Path(out).write_text(text + "\n", encoding="utf-8")
            click.echo(f"context written to {out}")
        else:
            click.echo(text)
    except InsightError as exc:
        raise click.ClickException(str(exc)) from exc
    finally:
        service.close()


@main.command()
@click.argument("dataset")
@click.argument("question")
@click.option("--model", "model_id", default=None, help="Model id for this question.")
@click.pass_context
def ask(ctx: click.Context, dataset: str, question: str, model_id: str | None) -> None:
    """Answer QUESTION over DATASET and print the turn as JSON."""
    service = InsightService(ctx.obj["config"])
    try:
        name = _resolve_dataset(service, dataset)
        session = service.create_session(name, model_id)
        turn = service.post_question(session["id"], question)
        click.echo(json.dumps(turn, indent=2, ensure_ascii=False, default=str))
        if turn["status"] == "failed":
            sys.exit(1)
    except InsightError as exc:
        raise click.ClickException(str(exc)) from exc
    finally:
        service.close()


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.pass_context
def serve(ctx: click.Context, host: str | None, port: int | None) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .api import create_app

    config: ServiceConfig = ctx.obj["config"]
    service = InsightService(config)
    if config.engine_uri:
        name = config.dataset_name or Path(config.engine_uri).stem
        known = {d["name"] for d in service.store.list_datasets()}
        if name not in known:
            service.register_dataset(config.engine_uri, name)
    app = create_app(service)
    uvicorn.run(app, host=host or config.host, port=port or config.port)


@main.command(context_settings={"ignore_unknown_options": True})
@click.option("--cassette", required=True, type=click.Path())
@click.argument("subcommand", nargs=-1, type=click.UNPROCESSED)
@click.pass_context
def record(ctx: click.Context, cassette: str, subcommand: tuple[str, ...]) -> None:
    """Re-run SUBCOMMAND with the gateway recording to CASSETTE."""
    if not subcommand:
        raise click.ClickException("record needs a subcommand, e.g. record --cassette c.jsonl hdc data.db")
    name, args = subcommand[0], list(subcommand[1:])
    command = main.commands.get(name)
    if command is None or name == "record":
        raise click.ClickException(f"unknown subcommand {name!r}")
    config: ServiceConfig = ctx.obj["config"]
    config.cassette_path = cassette
    config.cassette_mode = "record"
    with command.make_context(name, args, parent=ctx) as sub_ctx:
        command.invoke(sub_ctx)


if __name__ == "__main__":
    main()
