"""CLI commands for instacluster."""

from __future__ import annotations

import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator, Mapping

import click
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from .cluster import ClusterPhase, ClusterState
from .config import SimulationConfig
from .errors import USAGE_EXIT_CODE, ClusterNotReady, InstaClusterError
from .lifecycle import extend_cluster, start_cluster, stop_cluster
from .provider.models import AccessCredentials
from .services.planner import suggest_configuration
from .services.server import ServiceServer
from .simulation import Simulation, World, provision_cluster
from .specfile import (
    export_spec,
    load_spec,
    save_spec,
    spec_from_options,
    spec_to_json,
    validate_spec_file,
)

console = Console()
logger = logging.getLogger(__name__)

DEFAULT_STATE_FILE = ".instacluster/world.json"


def _load_env() -> None:
    # package directory first, then the current directory; never override
    env_file = Path(__file__).parent.parent / ".env"
    if env_file.exists():
        load_dotenv(env_file, override=False)
    load_dotenv(override=False)


def _configure_logging(verbose: bool) -> None:
    root = logging.getLogger("instacluster")
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        root.addHandler(RichHandler(console=Console(stderr=True), show_path=False))
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def _parse_overrides(values: tuple[str, ...]) -> dict[str, str]:
    overrides = {}
    for item in values:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise click.BadParameter(f"{item!r} is not KEY=VALUE", param_hint="--config")
        overrides[key.strip()] = value.strip()
    return overrides


def _split_services(value: str | None) -> list[str]:
    return [s.strip() for s in (value or "").split(",") if s.strip()]


# ---------------------------------------------------------------------------
# Shared options
# ---------------------------------------------------------------------------


def credential_options(f: Callable) -> Callable:
    f = click.option("--secret-key", envvar="INSTA_SECRET_KEY", help="Provider secret key")(f)
    f = click.option("--access-key-id", envvar="INSTA_ACCESS_KEY_ID",
                     help="Provider access key id")(f)
    return f


def region_option(f: Callable) -> Callable:
    return click.option("--region", help="Cluster region (optional with a single cluster)")(f)


def trace_option(f: Callable) -> Callable:
    return click.option("--trace", "trace_path", type=click.Path(dir_okay=False, path_type=Path),
                        help="Write the JSON-lines trace of this command")(f)


def _credentials(access_key_id: str | None, secret_key: str | None) -> AccessCredentials:
    if not access_key_id or not secret_key:
        raise click.UsageError(
            "credentials required: --access-key-id/--secret-key or "
            "INSTA_ACCESS_KEY_ID/INSTA_SECRET_KEY"
        )
    return AccessCredentials(key_id=access_key_id, secret=secret_key)


@contextmanager
def _handle_errors() -> Iterator[None]:
    try:
        yield
    except InstaClusterError as e:
        console.print(f"[red]{e.name}: {escape(str(e))}[/red]")
        raise SystemExit(e.exit_code) from None


@contextmanager
def _simulation(
    ctx: click.Context, trace_path: Path | None, seed: int = 0
) -> Iterator[Simulation]:
    """Load the world, run one command against it, then persist it."""
    state_file: Path = ctx.obj["state_file"]
    config: SimulationConfig = ctx.obj["config"]
    world = World.load(state_file) if state_file.exists() else World.new(seed)
    sim = Simulation(world, config)
    with _handle_errors():
        try:
            yield sim
        finally:
            sim.save(state_file)
            if trace_path:
                sim.trace.write(trace_path)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _cluster_table(sim: Simulation, state: ClusterState) -> Table:
    server = ServiceServer(sim, state.region)
    health = {row.hostname: row for row in server.health()}
    plan = server.state.plan
    table = Table(title=f"Cluster {state.region}")
    table.add_column("Hostname", style="cyan")
    table.add_column("Instance")
    table.add_column("Private IP")
    table.add_column("Type")
    table.add_column("Health")
    table.add_column("Services")
    for instance_id, hostname in state.hostname_map.ordered():
        instance = sim.provider.instance(instance_id)
        row = health.get(hostname)
        status = row.status.value if row else "-"
        colour = "green" if status == "healthy" else "yellow"
        table.add_row(
            hostname,
            instance_id,
            instance.private_ip or "-",
            instance.instance_type,
            f"[{colour}]{status}[/{colour}]",
            ",".join(sorted(plan.components_on(hostname))) if plan else "",
        )
    return table


def _print_summary(state: ClusterState) -> None:
    generation = state.key.generation if state.key else "-"
    console.print(
        f"[bold]{state.region}[/bold]: phase [cyan]{state.phase.value}[/cyan], "
        f"{state.size} host(s), {state.slave_count} slave(s), key generation {generation}"
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@click.group()
@click.option("--state-file", envvar="INSTA_STATE_FILE", default=DEFAULT_STATE_FILE,
              type=click.Path(dir_okay=False, path_type=Path), show_default=True,
              help="World state file shared between invocations")
@click.option("--backend", type=click.Choice(["simulator"]), default="simulator",
              help="Provider backend")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
@click.pass_context
def main(ctx: click.Context, state_file: Path, backend: str, verbose: bool) -> None:
    """InstaCluster - provision clusters on a simulated cloud."""
    _load_env()
    _configure_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["state_file"] = state_file
    ctx.obj["backend"] = backend
    ctx.obj["config"] = SimulationConfig.from_env()


@main.command("provision")
@click.option("--region", help="Region to provision in")
@click.option("--slaves", type=click.IntRange(min=0), default=0, help="Number of slaves")
@click.option("--instance-type", default="m3.large", show_default=True,
              help="Slave instance type")
@click.option("--master-instance-type", help="Master instance type (default: --instance-type)")
@click.option("--services", help="Comma-separated services to deploy")
@click.option("--seed", type=int, default=0, help="Seed for every random choice")
@click.option("--deactivate-key", is_flag=True, help="Deactivate the access key after discovery")
@click.option("--agent-on-master", is_flag=True, help="Run an agent on the master too")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Provision from a .cluster.json spec instead of flags")
@click.option("--image-id", help="Image for every instance")
@click.option("--key-name", help="Launch key pair authorized for the login user")
@click.option("--public-key", "public_key_file",
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Import this public key under --key-name before launching")
@click.option("--config", "config_items", multiple=True, metavar="SERVICE.KEY=VALUE",
              help="Service configuration override (repeatable)")
@credential_options
@trace_option
@click.pass_context
def provision(
    ctx: click.Context,
    region: str | None,
    slaves: int,
    instance_type: str,
    master_instance_type: str | None,
    services: str | None,
    seed: int,
    deactivate_key: bool,
    agent_on_master: bool,
    spec_path: Path | None,
    image_id: str | None,
    key_name: str | None,
    public_key_file: Path | None,
    config_items: tuple[str, ...],
    access_key_id: str | None,
    secret_key: str | None,
    trace_path: Path | None,
) -> None:
    """Provision a new cluster (one per region)."""
    creds = _credentials(access_key_id, secret_key)
    if public_key_file is not None and not key_name:
        raise click.UsageError("--public-key needs --key-name")
    if spec_path is None and not region:
        raise click.UsageError("--region is required unless --spec is given")
    overrides = _parse_overrides(config_items)

    with _handle_errors():
        if spec_path is not None:
            spec = load_spec(spec_path)
        else:
            spec = spec_from_options(
                region=region,
                slaves=slaves,
                instance_type=instance_type,
                master_instance_type=master_instance_type,
                services=_split_services(services),
                config_overrides=overrides,
                seed=seed,
                agent_on_master=agent_on_master,
                deactivate_key=deactivate_key,
            )

    with _simulation(ctx, trace_path, seed=spec.seed) as sim:
        if public_key_file is not None:
            public_key = public_key_file.read_text(encoding="utf-8").strip()
            sim.provider.import_key_pair(key_name, public_key)
        elif key_name and sim.provider.key_pair(key_name) is None:
            raise click.BadParameter(f"unknown key pair {key_name!r}", param_hint="--key-name")
        state = provision_cluster(sim, spec, creds, image_id=image_id, key_name=key_name)
        _print_summary(state)
        console.print(_cluster_table(sim, state))


@main.command("status")
@region_option
@click.option("--advance", type=click.FloatRange(min=0), default=0.0,
              help="Simulated seconds of heartbeats to run before reporting")
@trace_option
@click.pass_context
def status(ctx: click.Context, region: str | None, advance: float, trace_path: Path | None) -> None:
    """Show phase, hosts, key generation, agent health and service plan."""
    with _simulation(ctx, trace_path) as sim:
        state = sim.registry.require(region)
        server = ServiceServer(sim, state.region)
        if advance:
            server.run_heartbeats(advance)
        _print_summary(state)
        console.print(_cluster_table(sim, state))
        if server.state.plan:
            plan = server.state.plan
            table = Table(title="Service plan")
            table.add_column("Service", style="cyan")
            table.add_column("Hosts")
            table.add_column("Ports")
            for service in plan.services:
                descriptor = server.catalog.get(service)
                ports = [
                    f"{c.name}:{plan.ports[c.name]}"
                    for c in descriptor.components if c.name in plan.ports
                ]
                table.add_row(service, ",".join(plan.placements[service]), " ".join(ports))
            console.print(table)
        if state.failures:
            console.print(f"[yellow]Failures: {escape(str(state.failures))}[/yellow]")


@main.command("stop")
@region_option
@credential_options
@trace_option
@click.pass_context
def stop(ctx: click.Context, region: str | None, access_key_id: str | None,
         secret_key: str | None, trace_path: Path | None) -> None:
    """Stop every instance of the cluster."""
    creds = _credentials(access_key_id, secret_key)
    with _simulation(ctx, trace_path) as sim:
        state = stop_cluster(sim, sim.registry.require(region), creds)
        _print_summary(state)


@main.command("start")
@region_option
@credential_options
@trace_option
@click.pass_context
def start(ctx: click.Context, region: str | None, access_key_id: str | None,
          secret_key: str | None, trace_path: Path | None) -> None:
    """Start a stopped cluster (slaves first) and reconcile it."""
    creds = _credentials(access_key_id, secret_key)
    with _simulation(ctx, trace_path) as sim:
        state = sim.registry.require(region)
        report = start_cluster(sim, state, creds)
        _print_summary(state)
        console.print(
            f"Rewrote {report.hosts_files_rewritten} hosts file(s), "
            f"{len(report.rebound)} address(es) changed"
        )
        if report.rebound:
            table = Table(title="Rebound addresses")
            table.add_column("Hostname", style="cyan")
            table.add_column("Old IP")
            table.add_column("New IP")
            for instance_id, old_ip, new_ip in report.rebound:
                table.add_row(state.hostname_map.hostname_of(instance_id), old_ip, new_ip)
            console.print(table)


@main.command("extend")
@region_option
@click.option("--count", type=click.IntRange(min=1), required=True, help="Slaves to add")
@click.option("--instance-type", help="Instance type of the new slaves")
@credential_options
@trace_option
@click.pass_context
def extend(ctx: click.Context, region: str | None, count: int, instance_type: str | None,
           access_key_id: str | None, secret_key: str | None, trace_path: Path | None) -> None:
    """Add slaves to an existing cluster."""
    creds = _credentials(access_key_id, secret_key)
    with _simulation(ctx, trace_path) as sim:
        state = extend_cluster(sim, sim.registry.require(region), creds, count, instance_type)
        _print_summary(state)
        console.print(_cluster_table(sim, state))


@main.command("install")
@region_option
@click.option("--services", required=True, help="Comma-separated services to add")
@trace_option
@click.pass_context
def install(ctx: click.Context, region: str | None, services: str,
            trace_path: Path | None) -> None:
    """Deploy additional services on a ready cluster."""
    with _simulation(ctx, trace_path) as sim:
        state = sim.registry.require(region)
        if state.phase != ClusterPhase.READY:
            raise ClusterNotReady(state.region, state.phase.value)
        server = ServiceServer(sim, state.region)
        current = server.state.plan.services if server.state.plan else []
        plan = suggest_configuration(current + _split_services(services), state)
        outcome = server.deploy_plan(plan, state.config_overrides)

        table = Table(title="Deployment")
        table.add_column("Service", style="cyan")
        table.add_column("Host")
        table.add_column("Result")
        failed = False
        for service, results in outcome.items():
            for hostname, result in results.items():
                failed = failed or not result.ok
                text = "[green]ok[/green]" if result.ok else f"[red]{result.error}[/red]"
                table.add_row(service, hostname, text)
        console.print(table)
        if failed:
            raise SystemExit(1)


@main.command("export-spec")
@region_option
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path),
              help="Spec file to write (stdout when omitted)")
@click.pass_context
def export_spec_cmd(ctx: click.Context, region: str | None, output: Path | None) -> None:
    """Export a ready cluster as a .cluster.json spec."""
    with _simulation(ctx, None) as sim:
        state = sim.registry.require(region)
        spec = export_spec(state, ServiceServer(sim, state.region).state.plan)
        if output is None:
            click.echo(spec_to_json(spec), nl=False)
        else:
            save_spec(spec, output)
            console.print(f"[green]Wrote {output}[/green]")


@main.command("validate-spec")
@click.option("--spec", "spec_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Spec file to check")
def validate_spec_cmd(spec_path: Path) -> None:
    """Validate a .cluster.json spec and list every problem."""
    result = validate_spec_file(spec_path)
    if result.ok:
        console.print(f"[green]{spec_path} is valid[/green]")
        return
    for path, message in result.errors:
        console.print(f"[red]{escape(path)}[/red]: {escape(message)}")
    raise SystemExit(1)


@contextmanager
def _environment(environ: Mapping[str, str | None] | None) -> Iterator[None]:
    """Overlay ``environ`` on os.environ; None values unset a variable."""
    if environ is None:
        yield
        return
    saved = dict(os.environ)
    for key, value in environ.items():
        if value is None:
            os.environ.pop(key, None)
        else:
            os.environ[key] = value
    try:
        yield
    finally:
        os.environ.clear()
        os.environ.update(saved)


def run(
    argv: list[str] | None = None, environ: Mapping[str, str | None] | None = None
) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    with _environment(environ):
        try:
            main.main(args=argv, prog_name="instacluster", standalone_mode=False)
        except click.UsageError as e:
            e.show()
            return USAGE_EXIT_CODE
        except click.ClickException as e:
            e.show()
            return e.exit_code
        except SystemExit as e:
            return int(e.code or 0)
    return 0
