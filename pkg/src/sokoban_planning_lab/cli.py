"""
Command-line surface: ``sokoban-lab``.

Machine-readable output (CSV rows, level text) goes to stdout, or under
``--out`` next to a run manifest; log text goes to stderr.
"""

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np
from loguru import logger

from .config import LabConfig, load_config
from .drc.weights import WeightSet, load_weights, save_weights
from .errors import LabError, ShapeMismatch
from .harness.dump import export_drc_episode, export_episode, write_rows
from .harness.evaluate import SolverKind, evaluate
from .harness.manifest import RunManifest
from .harness.suite import load_suite, write_suite
from .interp.ablation import ABLATION_TENSORS, apply_ablation, collect_means, gate_importance, wta_slices
from .interp.encoder import combine_encoder, interior_error
from .interp.features import RecordedStep, steps_from_drc, steps_from_episode
from .interp.intervene import (
    MIN_TRANSITIONS,
    PROTOCOL_GROUPS,
    DrcContext,
    EngineContext,
    causal_intervene,
    collect_drc_transitions,
    collect_engine_transitions,
    group_protocol,
    intervention_score,
)
from .interp.probes import (
    LABEL_KINDS,
    MIN_PROBE_SAMPLES,
    VARIANTS,
    auc_probe,
    classify_horizon,
    horizon_profile,
    probe_dataset_from_drc,
    probe_dataset_from_engine,
    train_action_probe,
)
from .interp.regression import label_regression, offset_regression
from .interp.rollout import DrcPolicy, run_drc
from .interp.steering import steer_weights
from .log import setup_logging
from .planner.channels import DIRECTION_GROUPS, ChannelMap, default_channel_map
from .planner.compile import COMPILED_CHANNELS, compile_to_weights
from .planner.experiments import STEERING_SIZES, largest_solved, zigzag_steering
from .planner.runner import Episode, run_planner
from .sokoban.boxoban import load_levels, write_level_file
from .sokoban.generators import CASE_KINDS, generate_case_level
from .sokoban.level import ACTIONS, Action, Level, format_level
from .sokoban.oracle import solve_oracle
from .sokoban.render import render_rgb
from .specs import AblationSpec, InterventionSpec

PLANNERS = ("synthetic", "drc")
GATE_NAMES = ("i", "j", "f", "o")


@dataclass
class LabState:
    """Global flags, collected before any subcommand runs."""

    config_path: Optional[Path] = None
    levels_arg: Optional[str] = None
    out: Optional[Path] = None
    ticks: Optional[int] = None
    overrides: Dict[str, Any] = field(default_factory=dict)
    command: str = ""

    @property
    def config(self) -> LabConfig:
        return load_config(self.config_path, self.overrides)

    @property
    def level_set(self) -> str:
        return self.levels_arg or "suite"

    def levels(self) -> List[Level]:
        return resolve_levels(self.levels_arg)

    def manifest(self) -> RunManifest:
        return RunManifest(command=self.command, config=self.config, level_set=self.level_set)


def resolve_levels(text: Optional[str]) -> List[Level]:
    """
    A level file or directory, ``suite`` for the bundled suite, or a case
    kind with an optional size (``zigzag`` or ``zigzag:16``).
    """
    if text is None:
        return load_suite()
    path = Path(text)
    if path.exists():
        return load_levels(path)
    if text.rstrip("/") == "suite":
        return load_suite()
    kind, _, size = text.partition(":")
    if kind in CASE_KINDS:
        try:
            return [generate_case_level(kind, int(size) if size else None)]
        except ValueError as exc:
            if isinstance(exc, LabError):
                raise
            raise click.BadParameter(f"Bad size in '{text}'", param_hint="--levels") from exc
    raise click.BadParameter(
        f"'{text}' is not a file, a directory, 'suite' or one of: {', '.join(CASE_KINDS)}", param_hint="--levels"
    )


def _state(ctx: click.Context) -> LabState:
    return ctx.ensure_object(LabState)


def _store(ctx: click.Context, param: click.Parameter, value):
    if value is None:
        return
    state = _state(ctx)
    if param.name == "levels":
        state.levels_arg = value
    elif param.name == "out":
        state.out = Path(value)
    elif param.name == "ticks":
        state.ticks = value
        state.overrides["ticks_per_step"] = value
    elif param.name == "thinking_steps":
        state.overrides["thinking_steps"] = value
    elif param.name == "seed":
        state.overrides["seed"] = value


def shared_options(out: bool = True):
    """Flags accepted both before and after the subcommand name."""
    options = [
        click.option(
            "--seed", type=click.IntRange(min=0), callback=_store, expose_value=False, help="Seed for every random draw"
        ),
        click.option(
            "--levels", callback=_store, expose_value=False, help="Level file, directory, 'suite' or case kind[:size]"
        ),
        click.option("--ticks", type=click.IntRange(min=1), callback=_store, expose_value=False, help="Ticks per step"),
        click.option(
            "--thinking-steps",
            type=click.IntRange(min=0),
            callback=_store,
            expose_value=False,
            help="Steps before acting",
        ),
    ]
    if out:
        options.append(
            click.option(
                "--out", type=click.Path(file_okay=False), callback=_store, expose_value=False, help="Output directory"
            )
        )

    def decorate(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return decorate


def emit(name: str, rows: Sequence[dict], fieldnames: Optional[Sequence[str]] = None) -> None:
    """CSV rows to stdout, or to ``--out``/<name>.csv with the run manifest beside it."""
    state = _state(click.get_current_context())
    if state.out is None:
        write_rows(None, rows, sink=sys.stdout, fieldnames=fieldnames)
        return
    path = state.out / f"{name}.csv"
    write_rows(path, rows, fieldnames=fieldnames)
    manifest = state.manifest().write(state.out)
    logger.info(f"Wrote {path} ({manifest.name})")


def _load_weights(state: LabState, path: Optional[Path]) -> Tuple[WeightSet, Optional[ChannelMap]]:
    """Weights from ``path``, or the configured gains compiled to a one-layer network."""
    if path is None:
        logger.info("No --weights given; compiling the configured gains")
        channel_map = default_channel_map(COMPILED_CHANNELS)
        weights = compile_to_weights(channel_map, state.config.gains)
    else:
        weights, channel_map = load_weights(path), None
    if state.ticks is not None:
        weights = dataclasses.replace(weights, config=weights.config.model_copy(update={"ticks": state.ticks}))
    return weights, channel_map


def _policy(state: LabState, path: Optional[Path]) -> DrcPolicy:
    weights, channel_map = _load_weights(state, path)
    return DrcPolicy(weights, gains=state.config.gains, channel_map=channel_map)


def _engine_episode(level: Level, config: LabConfig, record_grids: bool = True) -> Episode:
    return run_planner(
        level,
        max_steps=config.max_steps,
        ticks_per_step=config.ticks_per_step,
        thinking_steps=config.thinking_steps,
        gains=config.gains,
        require_connected=config.require_connected,
        record_grids=record_grids,
    )


def _level_dir(level: Level, index: int) -> str:
    name = level.level_id or f"level{index:03d}"
    return name.replace("/", "_").replace(" ", "_")


def _parse_direction(text: str) -> Action:
    try:
        return Action[text.upper()] if len(text) > 1 else Action.from_letter(text)
    except (KeyError, ValueError) as exc:
        raise click.BadParameter(f"Unknown direction '{text}'") from exc


def _parse_channel_directions(items: Sequence[str]) -> Dict[int, Action]:
    out = {}
    for item in items:
        channel, sep, direction = item.partition(":")
        if not sep or not channel.strip().isdigit():
            raise click.BadParameter(f"Expected CHANNEL:DIRECTION, got '{item}'", param_hint="--channel")
        out[int(channel)] = _parse_direction(direction.strip())
    return out


def _read_intervention_specs(path: Path) -> List[InterventionSpec]:
    """One spec per blank-line separated block of key=value lines."""
    blocks = [block for block in path.read_text(encoding="utf-8").split("\n\n") if block.strip()]
    return [InterventionSpec.from_key_values(block) for block in blocks]


class LabGroup(click.Group):
    """Maps LabError to exit status 1 with the message on the log stream."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except LabError as exc:
            logger.error(str(exc))
            raise click.exceptions.Exit(1) from exc


@click.group(cls=LabGroup)
@shared_options()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="key=value config file overriding the packaged defaults",
)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
@click.option("--quiet", is_flag=True, help="Warnings and errors only")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[Path], verbose: bool, quiet: bool):
    """DRC inference, the synthetic planner and the tools used to study them."""
    setup_logging("DEBUG" if verbose else "WARNING" if quiet else "INFO")
    state = _state(ctx)
    state.config_path = config_path
    state.command = ctx.invoked_subcommand or ""


@cli.command()
@click.argument("source", required=False)
@shared_options()
@click.pass_obj
def solve(state: LabState, source: Optional[str]):
    """Solve levels with the oracle and print solution lengths."""
    if source is not None:
        state.levels_arg = source
    config = state.config
    rows = []
    for index, level in enumerate(state.levels()):
        result = solve_oracle(level, node_budget=config.node_budget)
        rows.append(
            {
                "index": index,
                "level_id": level.level_id or "",
                "status": result.status.value,
                "length": "" if result.length is None else result.length,
                "nodes_expanded": result.nodes_expanded,
                "actions": "".join(a.letter for a in result.solution or []),
            }
        )
    emit("solve", rows)


@cli.command()
@click.option("--planner", type=click.Choice(PLANNERS), default="synthetic", show_default=True)
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="drc weight file")
@click.option(
    "--dump", "dump_dir", type=click.Path(file_okay=False, path_type=Path), help="Write heatmaps and traces here"
)
@shared_options()
@click.pass_obj
def run(state: LabState, planner: str, weights: Optional[Path], dump_dir: Optional[Path]):
    """Play levels with the synthetic planner or a DRC network."""
    config = state.config
    policy = _policy(state, weights) if planner == "drc" else None
    rows = []
    for index, level in enumerate(state.levels()):
        if policy is None:
            episode = _engine_episode(level, config, record_grids=dump_dir is not None)
            if dump_dir is not None:
                export_episode(episode, dump_dir / _level_dir(level, index), default_channel_map())
        else:
            drc_episode = run_drc(
                policy,
                level,
                max_steps=config.max_steps,
                thinking_steps=config.thinking_steps,
                record_states=dump_dir is not None,
            )
            episode = drc_episode.episode
            if dump_dir is not None:
                export_drc_episode(drc_episode, dump_dir / _level_dir(level, index), _drc_channels(policy, ()))
        rows.append(
            {
                "index": index,
                "level_id": level.level_id or "",
                "solved": int(episode.solved),
                "n_steps": episode.n_steps,
                "n_actions": episode.n_actions,
                "actions": episode.action_string,
            }
        )
    emit("run", rows)


@cli.command("evaluate")
@click.option("--planner", type=click.Choice([k.value for k in SolverKind]), default="synthetic", show_default=True)
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="drc weight file")
@shared_options()
@click.pass_obj
def evaluate_command(state: LabState, planner: str, weights: Optional[Path]):
    """Solve rate over a level set with a bootstrap interval."""
    solver = SolverKind(planner)
    weight_set, channel_map = _load_weights(state, weights) if solver is SolverKind.DRC else (None, None)
    stats = evaluate(solver, state.levels(), config=state.config, weights=weight_set, channel_map=channel_map)
    if state.out is not None:
        write_rows(state.out / "outcomes.csv", [o.to_dict() for o in stats.outcomes])
    emit("stats", [stats.to_dict()])


@cli.command()
@click.argument("kind", type=click.Choice(CASE_KINDS + ("suite",)))
@click.option("--size", type=int, help="Side length; the kind's default when omitted")
@click.option("--out", "out_path", type=click.Path(path_type=Path), help="Level file, or directory for 'suite'")
def generate(kind: str, size: Optional[int], out_path: Optional[Path]):
    """Write a case-study level, or the bundled suite."""
    if kind == "suite":
        path = write_suite(out_path or Path("suite"))
        click.echo(str(path))
        return
    level = generate_case_level(kind, size)
    if out_path is None:
        click.echo(f"; {level.level_id}\n{format_level(level)}")
        return
    write_level_file([level], out_path)
    logger.info(f"Wrote {level.level_id} to {out_path}")
    click.echo(str(out_path))


@cli.command("compile-weights")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Weight file")
@click.option("--channels", type=click.IntRange(min=1), default=COMPILED_CHANNELS, show_default=True)
@click.pass_obj
def compile_weights(state: LabState, out_path: Path, channels: int):
    """Compile the configured gains into one-layer DRC weights."""
    weights = compile_to_weights(default_channel_map(channels), state.config.gains)
    save_weights(weights, out_path)
    write_rows(
        None,
        [{"path": str(out_path), "layers": len(weights.layers), "channels": weights.channels}],
        sink=sys.stdout,
    )


@cli.command("combine-encoder")
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="drc weight file")
@click.option("--layer", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--gate", type=click.Choice(GATE_NAMES), default="o", show_default=True)
@click.option("--verify", is_flag=True, help="Log the interior error against the two-stage path on each level")
@shared_options()
@click.pass_obj
def combine_encoder_command(state: LabState, weights: Optional[Path], layer: int, gate: str, verify: bool):
    """Fold the encoder into one gate's observation kernel."""
    weight_set, _ = _load_weights(state, weights)
    combined = combine_encoder(weight_set, layer, gate)
    if verify:
        for level in state.levels():
            try:
                error = interior_error(render_rgb(level), weight_set, layer, gate)
            except ShapeMismatch as exc:
                logger.warning(f"{level.level_id}: {exc}")
                continue
            logger.success(f"{level.level_id}: interior error {error:.3g}")
    rows = [
        {"row": r, "col": c, "in_channel": i, "out_channel": o, "value": repr(float(value))}
        for (r, c, i, o), value in np.ndenumerate(combined.kernel)
    ]
    rows += [
        {"row": "", "col": "", "in_channel": "bias", "out_channel": o, "value": repr(float(value))}
        for o, value in enumerate(combined.bias)
    ]
    emit(f"encoder_{layer}_{gate}", rows)


@cli.command()
@click.option("--planner", type=click.Choice(PLANNERS), default="synthetic", show_default=True)
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="drc weight file")
@click.option(
    "--group", "groups", multiple=True, type=click.Choice(PROTOCOL_GROUPS), help="Protocol group; all by default"
)
@click.option(
    "--spec",
    "spec_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="key=value intervention file",
)
@click.option("--limit", type=click.IntRange(min=1), help="Sample at most this many transitions")
@click.option("--min-transitions", type=click.IntRange(min=1), default=MIN_TRANSITIONS, show_default=True)
@shared_options()
@click.pass_obj
def intervene(
    state: LabState,
    planner: str,
    weights: Optional[Path],
    groups: Tuple[str, ...],
    spec_path: Optional[Path],
    limit: Optional[int],
    min_transitions: int,
):
    """Score causal interventions on recorded transitions."""
    config = state.config
    levels = state.levels()
    rng = np.random.default_rng(config.seed)
    if planner == "drc":
        policy = _policy(state, weights)
        if not policy.compiled and spec_path is None:
            raise click.UsageError("Protocol groups edit plan channels; pass --spec for weights with a head")
        context = DrcContext(policy)
        channel_map = policy.channel_map
        transitions = collect_drc_transitions(policy, levels, max_steps=config.max_steps, limit=limit, rng=rng)
    else:
        context = EngineContext(config.gains, ticks_per_step=config.ticks_per_step)
        channel_map = context.channel_map
        transitions = collect_engine_transitions(
            levels,
            config.gains,
            ticks_per_step=config.ticks_per_step,
            max_steps=config.max_steps,
            limit=limit,
            rng=rng,
        )

    if spec_path is not None:
        specs = _read_intervention_specs(spec_path)
        rows = []
        for index, transition in enumerate(transitions):
            outcome = causal_intervene(context, transition, specs)
            rows.append(
                {
                    "index": index,
                    "level_id": transition.level.level_id or "",
                    "baseline": outcome.baseline.name,
                    "action": outcome.action.name,
                    "changed": int(outcome.changed),
                }
            )
        changed = sum(row["changed"] for row in rows)
        logger.info(f"Intervention changed {changed} of {len(rows)} actions")
        emit("intervene", rows, fieldnames=("index", "level_id", "baseline", "action", "changed"))
        return

    rows = []
    for group in groups or PROTOCOL_GROUPS:
        protocol = group_protocol(group, channel_map, config.gains)
        score = intervention_score(context, transitions, protocol, group, min_transitions=min_transitions, rng=rng)
        rows.append(score.to_dict())
    emit("intervention_scores", rows)


@cli.command()
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="drc weight file")
@click.option(
    "--spec", "spec_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="key=value ablation file"
)
@click.option("--mode", type=click.Choice(["mean_activation", "zero_kernel", "cache_1step"]))
@click.option("--tensor", type=click.Choice(ABLATION_TENSORS), default="c", show_default=True)
@click.option("--layer", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--channels", default="", help="Comma-separated channels; all when empty")
@click.option("--at-ticks", default="0", show_default=True, help="Comma-separated ticks for mean_activation")
@click.option("--slice", "slices", multiple=True, help="layer.gate.kernel.in.out for zero_kernel")
@click.option("--wta", is_flag=True, help="zero_kernel on the compiled cross-direction inhibition")
@click.option("--gates", is_flag=True, help="Mean-ablate each gate tensor at tick 0 in turn")
@click.option("--mean-levels", help="Levels for the mean source; the evaluated levels when omitted")
@shared_options()
@click.pass_obj
def ablate(
    state: LabState,
    weights: Optional[Path],
    spec_path: Optional[Path],
    mode: Optional[str],
    tensor: str,
    layer: int,
    channels: str,
    at_ticks: str,
    slices: Tuple[str, ...],
    wta: bool,
    gates: bool,
    mean_levels: Optional[str],
):
    """Solve rate with and without an ablation."""
    config = state.config
    levels = state.levels()
    weight_set, channel_map = _load_weights(state, weights)
    policy = DrcPolicy(weight_set, gains=config.gains, channel_map=channel_map)
    mean_source = mean_levels or state.level_set
    kwargs = dict(
        gains=config.gains, channel_map=channel_map, max_steps=config.max_steps, thinking_steps=config.thinking_steps
    )

    if gates:
        means = collect_means(policy, resolve_levels(mean_levels) if mean_levels else levels, config.max_steps)
        results = gate_importance(weight_set, levels, means, **kwargs)
        emit("gate_importance", [{"tensor": name, **result.to_dict()} for name, result in results.items()])
        return

    if spec_path is not None:
        spec = AblationSpec.from_key_values(spec_path.read_text(encoding="utf-8"))
    elif wta:
        if not policy.compiled:
            raise click.UsageError("--wta needs compiled weights")
        spec = AblationSpec.from_key_values(
            {"mode": "zero_kernel", "slices": ",".join(_slice_text(s) for s in wta_slices(policy.channel_map))}
        )
    elif mode is not None:
        pairs = {"mode": mode, "tensor": tensor, "layer": str(layer), "channels": channels, "ticks": at_ticks}
        if slices:
            pairs["slices"] = ",".join(slices)
        if mode == "mean_activation":
            pairs["mean_source"] = mean_source
        spec = AblationSpec.from_key_values(pairs)
    else:
        raise click.UsageError("Give --spec, --mode, --wta or --gates")

    if spec.mean_source is not None:
        spec.means = collect_means(policy, resolve_levels(mean_levels) if mean_levels else levels, config.max_steps)
    result = apply_ablation(weight_set, spec, levels, **kwargs)
    emit("ablation", [result.to_dict()])


def _slice_text(s) -> str:
    return f"{s.layer}.{s.gate}.{s.kernel}.{s.in_channel}.{s.out_channel}"


@cli.command()
@click.option("--planner", type=click.Choice(PLANNERS), default="synthetic", show_default=True)
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="drc weight file")
@click.option("--factor", "factors", multiple=True, type=float, help="Scale factor; 1.0 and 1.2 by default")
@click.option(
    "--size", "sizes", multiple=True, type=int, help="Zigzag sizes for the synthetic planner; 8 to 12 by default"
)
@click.option("--save", "save_path", type=click.Path(dir_okay=False, path_type=Path), help="Write steered weights")
@shared_options()
@click.pass_obj
def steer(
    state: LabState,
    planner: str,
    weights: Optional[Path],
    factors: Tuple[float, ...],
    sizes: Tuple[int, ...],
    save_path: Optional[Path],
):
    """Scale the recurrent kernels (or extension gains) and re-solve."""
    config = state.config
    factors = factors or (1.0, 1.2)
    if planner == "synthetic":
        outcomes = zigzag_steering(factors, sizes=sizes or STEERING_SIZES, gains=config.gains)
        emit("steering", [dataclasses.asdict(o) for o in outcomes])
        for factor in factors:
            logger.info(f"Factor {factor}: largest zigzag solved {largest_solved(outcomes, factor)}")
        return

    weight_set, channel_map = _load_weights(state, weights)
    if save_path is not None and len(factors) != 1:
        raise click.UsageError("--save needs exactly one --factor")
    levels = state.levels()
    rows = []
    for factor in factors:
        steered = steer_weights(weight_set, factor)
        if save_path is not None:
            save_weights(steered, save_path)
        stats = evaluate(SolverKind.DRC, levels, config=config, weights=steered, channel_map=channel_map)
        rows.append({"factor": factor, **stats.to_dict()})
    emit("steering", rows)


def _drc_channels(policy: DrcPolicy, channels: Sequence[int]) -> List[int]:
    if channels:
        return list(channels)
    if policy.compiled:
        return list(policy.channel_map.box_short)
    return list(range(policy.weights.channels))


def _episodes(state: LabState, planner: str, weights: Optional[Path]):
    """Recorded episodes on every level: engine Episodes, or DrcEpisodes and their policy."""
    config = state.config
    levels = state.levels()
    if planner == "synthetic":
        return [_engine_episode(level, config) for level in levels], None
    policy = _policy(state, weights)
    episodes = [
        run_drc(policy, level, max_steps=config.max_steps, thinking_steps=config.thinking_steps) for level in levels
    ]
    return episodes, policy


@cli.command()
@click.argument("kind", type=click.Choice(["offset", "label", "auc", "action"]))
@click.option("--planner", type=click.Choice(PLANNERS), default="synthetic", show_default=True)
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="drc weight file")
@click.option("--group", type=click.Choice(DIRECTION_GROUPS), default="box_short", show_default=True)
@click.option("--channel", "channel_items", multiple=True, help="drc channel, or CHANNEL:DIRECTION for auc")
@click.option("--horizon", "horizons", multiple=True, type=click.IntRange(min=1), help="AUC horizons; 10 by default")
@click.option("--profile", is_flag=True, help="AUC at every horizon 1..50 and a short/long verdict")
@click.option("--variant", type=click.Choice(VARIANTS), default="short", show_default=True)
@click.option("--label-kind", type=click.Choice(LABEL_KINDS), default="box", show_default=True)
@click.option("--ci", is_flag=True, help="Bootstrap intervals on AUC")
@click.option("--min-samples", type=click.IntRange(min=1), default=MIN_PROBE_SAMPLES, show_default=True)
@shared_options()
@click.pass_obj
def probe(
    state: LabState,
    kind: str,
    planner: str,
    weights: Optional[Path],
    group: str,
    channel_items: Tuple[str, ...],
    horizons: Tuple[int, ...],
    profile: bool,
    variant: str,
    label_kind: str,
    ci: bool,
    min_samples: int,
):
    """Offset regression, label regression, AUC probes or the action probe."""
    config = state.config
    episodes, policy = _episodes(state, planner, weights)

    if kind == "action":
        if policy is None:
            features, actions = probe_dataset_from_engine(episodes)
        else:
            features, actions = probe_dataset_from_drc(episodes)
        fit = train_action_probe(features, actions, seed=config.seed, min_samples=min_samples)
        emit(
            "action_probe",
            [
                {
                    "accuracy": fit.accuracy,
                    "iterations": fit.iterations,
                    "loss": fit.loss,
                    "n_train": fit.n_train,
                    "n_test": fit.n_test,
                    "flags": ";".join(fit.flags),
                }
            ],
        )
        return

    steps: List[RecordedStep] = []
    if policy is None:
        channel_map = default_channel_map()
        for index, episode in enumerate(episodes):
            steps += steps_from_episode(episode, channel_map, group, index=index)
        roles = [channel_map.role_names()[c] for c in channel_map.group(group)]
        directions = dict(enumerate(ACTIONS))
        channels = None
    else:
        for index, episode in enumerate(episodes):
            steps += steps_from_drc(episode, index=index)
        roles = [f"h.{c}" for c in range(policy.weights.channels)]
        if kind == "auc":
            directions = _parse_channel_directions(channel_items) if channel_items else _compiled_directions(policy)
        channels = [int(item.partition(":")[0]) for item in channel_items] or None

    rng = np.random.default_rng(config.seed)
    if kind == "offset":
        report = offset_regression(steps, channels)
        emit("offsets", [{"role": roles[r.channel], **r.to_dict()} for r in report.rows])
    elif kind == "label":
        report = label_regression(steps, channels)
        emit("label_regression", [{"role": roles[r.channel], **r.to_dict()} for r in report.rows])
    elif profile:
        rows = []
        for channel, direction in directions.items():
            curve = horizon_profile(steps, channel, direction, kind=label_kind, rng=rng)
            verdict = classify_horizon(curve) or ""
            rows += [
                {"role": roles[channel], "channel": channel, "horizon": k, "auc": auc, "class": verdict}
                for k, auc in curve
            ]
        emit("horizon_profile", rows)
    else:
        report = auc_probe(steps, directions, horizons or (10,), variant, label_kind, rng=rng, with_ci=ci)
        emit("auc", [{"role": roles[r.channel], **r.to_dict()} for r in report.rows])


def _compiled_directions(policy: DrcPolicy) -> Dict[int, Action]:
    if not policy.compiled:
        raise click.UsageError("AUC on weights with a head needs --channel CHANNEL:DIRECTION")
    return {policy.channel_map.index("box_short", a): a for a in ACTIONS}


@cli.command()
@click.option("--planner", type=click.Choice(PLANNERS), default="synthetic", show_default=True)
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="drc weight file")
@click.option("--group", "groups", multiple=True, type=click.Choice(DIRECTION_GROUPS), help="Engine channel groups")
@click.option("--channel", "channels", multiple=True, type=click.IntRange(min=0), help="drc channels")
@click.option("--no-heatmaps", is_flag=True, help="Traces and tables only")
@shared_options()
@click.pass_obj
def dump(
    state: LabState,
    planner: str,
    weights: Optional[Path],
    groups: Tuple[str, ...],
    channels: Tuple[int, ...],
    no_heatmaps: bool,
):
    """Write heatmaps and traces for every level under --out."""
    if state.out is None:
        raise click.UsageError("dump needs --out")
    episodes, policy = _episodes(state, planner, weights)
    rows = []
    for index, (level, episode) in enumerate(zip(state.levels(), episodes)):
        target = state.out / _level_dir(level, index)
        if policy is None:
            written = export_episode(
                episode, target, default_channel_map(), groups or ("box_short",), heatmaps=not no_heatmaps
            )
        else:
            written = export_drc_episode(
                episode, target, _drc_channels(policy, channels), heatmaps=not no_heatmaps
            )
        rows += [
            {"level_id": level.level_id or "", "kind": kind, "path": str(path)}
            for kind, paths in written.items()
            for path in paths
        ]
    emit("dump", rows, fieldnames=("level_id", "kind", "path"))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the exit status (0 success, 2 usage error, 1 runtime error)."""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="sokoban-lab", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    return result if isinstance(result, int) else 0


__all__ = ["LabState", "cli", "main", "resolve_levels"]
