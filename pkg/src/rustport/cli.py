"""Command-line surface."""

from __future__ import annotations

import json
import sys

import click

from .errors import ToolchainMissing, TranslationAborted
from .pipeline import EXIT_ABORT, EXIT_OK, EXIT_TOOLCHAIN, RunConfig, run_pipeline


@click.group()
def main():
    """Translate Go projects into Rust, fragment by fragment, with rule
    enforcement, type-compatibility checks and snapshot-replay validation."""


@main.command()
@click.argument("src", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Output directory for the translated project and run artifacts.")
@click.option("--provider", type=click.Choice(["replay", "scripted", "fallback", "live"]),
              default="fallback", show_default=True)
@click.option("--replay-log", type=click.Path(dir_okay=False), default="")
@click.option("--scripted-answers", type=click.Path(dir_okay=False), default="",
              help="JSON file mapping fragment ids to answer sequences (scripted provider).")
@click.option("--snapshots", "snapshots_path", type=click.Path(dir_okay=False),
              default="", help="Reuse a previously recorded snapshot store.")
@click.option("--requery-budget", default=10, show_default=True)
@click.option("--type-max-tries", default=15, show_default=True)
@click.option("--semantic-max-tries", default=5, show_default=True)
@click.option("--temperature", default=0.2, show_default=True)
@click.option("--phase", type=click.Choice(["all", "type", "semantics"]), default="all",
              show_default=True)
@click.option("--no-snapshots", is_flag=True,
              help="Skip snapshot collection; compatibility checks pass vacuously.")
@click.option("--oracle-addr", default="", help="External oracle endpoint (host:port).")
@click.option("--offline", is_flag=True, help="Build with cargo --offline.")
@click.option("--json", "json_output", is_flag=True, help="Print the summary as JSON only.")
def translate(src, out_dir, provider, replay_log, scripted_answers, snapshots_path,
              requery_budget, type_max_tries, semantic_max_tries, temperature, phase,
              no_snapshots, oracle_addr, offline, json_output):
    """Translate the Go project at SRC into a Rust project under --out."""
    answers = {}
    if scripted_answers:
        answers = json.loads(open(scripted_answers, encoding="utf-8").read())
    config = RunConfig(
        source_root=src,
        out_dir=out_dir,
        provider=provider,
        replay_log=replay_log,
        scripted_answers=answers,
        snapshots_path=snapshots_path,
        no_snapshots=no_snapshots,
        requery_budget=requery_budget,
        type_max_tries=type_max_tries,
        semantic_max_tries=semantic_max_tries,
        temperature=temperature,
        phase=phase,
        oracle_addr=oracle_addr,
        offline=offline,
    )
    try:
        summary = run_pipeline(config)
    except TranslationAborted as exc:
        click.echo(f"aborted: {exc}", err=True)
        sys.exit(EXIT_ABORT)
    except ToolchainMissing as exc:
        click.echo(f"toolchain missing: {exc}", err=True)
        sys.exit(EXIT_TOOLCHAIN)
    if json_output:
        click.echo(json.dumps(summary.to_json(), sort_keys=True))
    else:
        click.echo(summary.table())
        click.echo(json.dumps(summary.to_json(), sort_keys=True))
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
