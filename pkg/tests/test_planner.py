"""Tests for the mechanism engine, readout, episodes, experiments and compiled weights."""

import numpy as np
import pytest

from sokoban_planning_lab.config import MechanismGains, load_defaults
from sokoban_planning_lab.errors import ChannelMapError, CompilationError, InconsistentTransition
from sokoban_planning_lab.harness.suite import load_suite
from sokoban_planning_lab.interp.rollout import DrcPolicy, run_drc
from sokoban_planning_lab.planner.channels import MIN_CHANNELS, default_channel_map
from sokoban_planning_lab.planner.compile import (
    COMPILED_CHANNELS,
    COMPILED_LATENCY,
    COMPILED_PLAN_TICKS,
    compile_to_weights,
    compiled_layout,
    compiled_trajectory,
)
from sokoban_planning_lab.planner.experiments import (
    backtracking_experiment,
    branch_arrows,
    junction_directions,
    largest_solved,
    path_preference_experiment,
    propagation_reach,
    run_static,
    seed_corridor,
    steer_gains,
    wta_convergence_ticks,
    zigzag_steering,
)
from sokoban_planning_lab.planner.grid import Horizon, PlanGrid, TraceKind, decode_plan
from sokoban_planning_lab.planner.mechanisms import (
    COMPILED_MECHANISMS,
    ENGINE_MECHANISMS,
    Mechanism,
    dead_end_mask,
    init_plan,
    read_neighbor,
    seed_mask,
    stop_mask,
    tick_plan,
    transfer_long_to_short,
)
from sokoban_planning_lab.planner.readout import (
    FALLBACK_ACTION,
    apply_transition_update,
    fallback_action,
    readout_action,
)
from sokoban_planning_lab.planner.runner import run_planner
from sokoban_planning_lab.sokoban.engine import replay, step
from sokoban_planning_lab.sokoban.generators import (
    backtrack_landmarks,
    backtrack_level,
    corridor_level,
    turn_level,
    two_paths_level,
    zigzag_level,
)
from sokoban_planning_lab.sokoban.level import Action, actions_from_str, parse_level
from sokoban_planning_lab.sokoban.oracle import solve_oracle
from sokoban_planning_lab.specs import InterventionSpec

VALIDATION_LEVELS = (
    [corridor_level(size) for size in range(5, 11)]
    + [turn_level(size) for size in range(6, 9)]
    + [zigzag_level(8), backtrack_level(20)]
)


@pytest.fixture
def channel_map():
    return default_channel_map()


@pytest.fixture
def gains():
    return MechanismGains()


@pytest.fixture(scope="module")
def compiled_map():
    return default_channel_map(COMPILED_CHANNELS)


@pytest.fixture(scope="module")
def compiled_weights(compiled_map):
    return compile_to_weights(compiled_map, MechanismGains())


class TestChannelMap:
    """Test the channel layout."""

    def test_default_layout(self, channel_map):
        """Test 24 distinct assigned channels and 8 spare at C = 32."""
        assigned = [c for _, group in channel_map.groups for c in group] + [c for _, c in channel_map.entities]
        assert len(assigned) == len(set(assigned)) == 24
        assert channel_map.spare == list(range(24, 32))

    def test_exact_fit(self):
        """Test C = 24 leaves nothing spare."""
        assert default_channel_map(MIN_CHANNELS).spare == []

    def test_too_small(self):
        """Test fewer than 24 channels is refused."""
        with pytest.raises(ChannelMapError):
            default_channel_map(16)

    def test_role_names_resolve(self, channel_map):
        """Test every role name resolves back to its channel."""
        for index, name in channel_map.role_names().items():
            assert channel_map.resolve(name) == index
        assert channel_map.index("box_short", Action.RIGHT) == 3
        assert channel_map.entity("agent") == 23

    def test_unknown_group(self, channel_map):
        """Test an unknown group name is an error."""
        with pytest.raises(ChannelMapError):
            channel_map.group("value")


class TestGainDefaults:
    """Test the packaged planner gains."""

    def test_documented_defaults(self, gains):
        """Test the model defaults carry the documented gain values."""
        assert gains.decay == 0.92
        assert gains.wta_inhibit == 0.6
        assert gains.lpe_gain == 1.1
        assert gains.tpe_gain == 0.45
        assert gains.threshold == 0.3
        assert gains.a_max == 2.0

    def test_packaged_defaults_match_model(self, gains):
        """Test defaults.yaml and the model agree."""
        assert load_defaults().gains == gains

    def test_no_retired_gains(self):
        """Test the order asymmetry and persistence terms are gone."""
        assert "wta_asymmetry" not in MechanismGains.model_fields
        assert "persistence" not in MechanismGains.model_fields

    def test_seed_drive_gives_seed_gain(self, gains):
        """Test a lone seeded square settles at seed_gain."""
        assert gains.a_max * np.tanh(1.0) * np.tanh(gains.seed_drive) == pytest.approx(gains.seed_gain)


class TestMasks:
    """Test the level-derived seed, stop and dead-end masks."""

    def test_forward_and_backward_seeds(self, small_level):
        """Test box seeds in pushable directions and target seeds against each direction."""
        mask = seed_mask(small_level)
        right, left, up = Action.RIGHT.value, Action.LEFT.value, Action.UP.value
        assert mask[1, 3, right] == 1.0
        assert mask[1, 3, left] == 1.0
        assert mask[1, 3, Action.DOWN.value] == 0.0
        assert mask[1, 4, right] == mask[1, 2, right] == 1.0
        assert mask[1, 1, right] == 0.0
        assert mask[2, 5, up] == 1.0
        assert mask.sum() == 5

    def test_walled_box_has_no_forward_seed(self):
        """Test a box that cannot be pushed gets no forward seed."""
        level = parse_level("######\n#@  $#\n#.   #\n######")
        assert seed_mask(level, backward=False).sum() == 0

    def test_local_seeds_ignore_reachability(self):
        """Test local seeds only look at the squares beside the box."""
        level = parse_level("########\n#@# $ .#\n########")
        assert seed_mask(level, backward=False).sum() == 0
        local = seed_mask(level, backward=False, local=True)
        assert local[1, 4, Action.RIGHT.value] == 1.0
        assert local[1, 4, Action.LEFT.value] == 1.0
        assert local.sum() == 2

    def test_local_seeds_never_push_onto_agent(self):
        """Test a push whose square ahead holds the agent is not a local seed."""
        level = parse_level("######\n# @$ #\n#  # #\n#.   #\n######")
        local = seed_mask(level, backward=False, local=True)
        assert local[1, 3, Action.LEFT.value] == 0.0
        assert local[1, 3, Action.RIGHT.value] == 1.0
        assert local[1, 3, Action.DOWN.value] == 0.0

    def test_stop_mask(self, small_level):
        """Test walls, open targets and pushes into walls are stopped."""
        mask = stop_mask(small_level)
        assert mask[0, 0].all()
        assert mask[1, 5].all()
        assert mask[1, 3, Action.UP.value] == 1.0
        assert mask[2, 3, Action.RIGHT.value] == 0.0

    def test_dead_end_at_corridor_end(self):
        """Test the bottom of the dead-end arm is a dead end and the fork corridor is not."""
        level = backtrack_level(20)
        dead_end = backtrack_landmarks(20)["D3"]
        mask = dead_end_mask(level)
        assert mask[dead_end[0], dead_end[1], Action.DOWN.value] == 1.0
        assert mask[2, 8, Action.RIGHT.value] == 0.0

    def test_target_is_never_a_dead_end(self):
        """Test the walled-in target square carries no dead end."""
        level = backtrack_level(20)
        (target,) = level.targets
        assert not dead_end_mask(level)[target[0], target[1]].any()

    def test_read_neighbor(self):
        """Test each square reads the square one step in the direction, zero off the grid."""
        x = np.arange(6, dtype=float).reshape(2, 3)
        right = read_neighbor(x, Action.RIGHT)
        assert right.tolist() == [[1.0, 2.0, 0.0], [4.0, 5.0, 0.0]]


class TestInitPlan:
    """Test grid initialization."""

    def test_seeded_activation(self, small_level, channel_map, gains):
        """Test seeded squares start at seed_gain and entities match the level."""
        grid = init_plan(small_level, channel_map, gains)
        right = channel_map.index("box_short", Action.RIGHT)
        assert grid.acts[1, 3, right] == pytest.approx(gains.seed_gain)
        assert grid.acts[1, 1, right] == 0.0
        assert grid.acts[1, 3, channel_map.entity("box")] == 1.0
        assert grid.acts[1, 5, channel_map.entity("target")] == 1.0
        assert grid.acts[1, 1, channel_map.entity("agent")] == 1.0
        assert grid.tick_index == 0


class TestTickPlan:
    """Test one synchronous mechanism update."""

    def test_input_grid_untouched(self, small_level, channel_map, gains):
        """Test the update is pure."""
        grid = init_plan(small_level, channel_map, gains)
        snapshot = grid.copy()
        new, _ = tick_plan(grid, small_level, channel_map, gains)
        assert np.array_equal(grid.acts, snapshot.acts)
        assert new.tick_index == 1

    def test_saturation_bound(self, two_paths, channel_map, gains):
        """Test box activations stay within a_max."""
        grid = run_static(two_paths, 12, gains=gains, channel_map=channel_map)
        assert np.abs(grid.acts[:, :, list(channel_map.box_short)]).max() <= gains.a_max

    @pytest.mark.parametrize("ticks", [1, 2, 4, 6])
    def test_reach_bound(self, channel_map, gains, ticks):
        """Test nothing moves further than one square per tick from the only seed."""
        level = seed_corridor(12)
        grid = init_plan(level, channel_map, gains)
        for _ in range(ticks):
            grid, _ = tick_plan(grid, level, channel_map, gains)
        active = np.nonzero(grid.acts[:, :, list(channel_map.box_short)])
        for r, c in zip(active[0], active[1]):
            assert abs(r - 1) + abs(c - 2) <= ticks

    def test_extension_moves_right(self, channel_map, gains):
        """Test the box seed activates the next square after one tick."""
        level = seed_corridor(12)
        grid = init_plan(level, channel_map, gains)
        right = channel_map.index("box_short", Action.RIGHT)
        assert grid.acts[1, 3, right] == 0.0
        grid, _ = tick_plan(grid, level, channel_map, gains)
        assert grid.acts[1, 3, right] > 0.0

    def test_one_event_per_large_change(self, small_level, channel_map, gains):
        """Test every large change and every new negative value is attributed exactly once."""
        grid = init_plan(small_level, channel_map, gains)
        before = grid.acts[:, :, list(channel_map.box_short)].copy()
        new, events = tick_plan(grid, small_level, channel_map, gains)
        after = new.acts[:, :, list(channel_map.box_short)]
        changed = (np.abs(after - before) >= gains.threshold / 2.0) | ((after < 0) & (before >= 0))
        expected = int(np.count_nonzero(changed))
        assert len(events) == expected
        assert len({(e.square, e.channel) for e in events}) == expected
        assert all(e.tick == 0 for e in events)

    def test_entity_channels_follow_level(self, small_level, channel_map, gains):
        """Test a stale entity channel is overwritten from the level."""
        grid = init_plan(small_level, channel_map, gains)
        grid.acts[2, 2, channel_map.entity("box")] = 1.0
        new, _ = tick_plan(grid, small_level, channel_map, gains)
        assert new.acts[2, 2, channel_map.entity("box")] == 0.0


class TestTransfer:
    """Test the long-term to short-term transfer."""

    def _grid(self, channel_map):
        grid = PlanGrid.empty(3, 3, channel_map.channels)
        grid.acts[1, 1, channel_map.index("box_short", Action.RIGHT)] = 1.0
        grid.cells[1, 1, channel_map.index("box_short", Action.RIGHT)] = np.arctanh(0.5)
        grid.acts[1, 1, channel_map.index("box_long", Action.DOWN)] = 0.8
        return grid

    def test_blocked_while_short_active(self, channel_map, gains):
        """Test the long value waits while another short direction holds the square."""
        out, moved = transfer_long_to_short(self._grid(channel_map), channel_map, gains)
        assert out.acts[1, 1, channel_map.index("box_short", Action.DOWN)] < gains.threshold
        assert moved == []

    def test_transfer_after_execution(self, channel_map, gains):
        """Test executing the short move lets the long value in."""
        out, moved = transfer_long_to_short(
            self._grid(channel_map), channel_map, gains, executed=((1, 1), Action.RIGHT)
        )
        down = channel_map.index("box_short", Action.DOWN)
        assert out.acts[1, 1, down] == pytest.approx(0.8)
        assert out.acts[1, 1, channel_map.index("box_long", Action.DOWN)] == 0.0
        assert moved == [((1, 1), down)]

    def test_identity_without_long(self, channel_map, gains):
        """Test nothing changes when no long channel is active."""
        grid = PlanGrid.empty(3, 3, channel_map.channels)
        grid.acts[0, 0, channel_map.index("box_short", Action.UP)] = 0.7
        out, moved = transfer_long_to_short(grid, channel_map, gains)
        assert np.array_equal(out.acts, grid.acts)
        assert moved == []


class TestDecodePlan:
    """Test plan decoding."""

    def test_empty(self, channel_map, gains):
        """Test a grid below threshold decodes to no arrows."""
        grid = PlanGrid.empty(3, 3, channel_map.channels)
        grid.acts[:, :, list(channel_map.box_short)] = gains.threshold / 2
        assert decode_plan(grid, channel_map, gains.threshold).is_empty

    def test_single_arrow(self, channel_map, gains):
        """Test one active channel gives one short-term arrow."""
        grid = PlanGrid.empty(3, 3, channel_map.channels)
        grid.acts[1, 2, channel_map.index("box_short", Action.LEFT)] = 1.0
        plan = decode_plan(grid, channel_map, gains.threshold)
        assert len(plan) == 1
        arrow = plan.get((1, 2))
        assert arrow.direction is Action.LEFT
        assert arrow.horizon is Horizon.SHORT
        assert arrow.strength == 1.0

    def test_long_when_short_inactive(self, channel_map, gains):
        """Test a long-term arrow appears only where no short one does."""
        grid = PlanGrid.empty(3, 3, channel_map.channels)
        grid.acts[0, 0, channel_map.index("box_long", Action.DOWN)] = 0.9
        grid.acts[1, 1, channel_map.index("box_long", Action.DOWN)] = 0.9
        grid.acts[1, 1, channel_map.index("box_short", Action.UP)] = 0.5
        plan = decode_plan(grid, channel_map, gains.threshold)
        assert plan.get((0, 0)).horizon is Horizon.LONG
        assert plan.get((1, 1)).direction is Action.UP

    def test_follow_and_connect(self, small_level, channel_map, gains):
        """Test arrows from the box to the target connect the level."""
        grid = PlanGrid.empty(small_level.height, small_level.width, channel_map.channels)
        right = channel_map.index("box_short", Action.RIGHT)
        grid.acts[1, 3, right] = grid.acts[1, 4, right] = 1.0
        plan = decode_plan(grid, channel_map, gains.threshold)
        assert plan.follow((1, 3)) == [(1, 3), (1, 4), (1, 5)]
        assert plan.connects(small_level)
        assert plan.render(small_level).splitlines()[1] == "#@ >>.#"


class TestReadout:
    """Test action readout and the transition update."""

    def test_empty_plan_falls_back(self, small_level, channel_map, gains):
        """Test no active channel gives the fallback action flagged as no plan."""
        grid = PlanGrid.empty(small_level.height, small_level.width, channel_map.channels)
        readout, _ = readout_action(grid, channel_map, small_level, gains)
        assert readout.no_plan
        assert readout.action is FALLBACK_ACTION

    def test_agent_channel_at_agent_square(self, small_level, channel_map, gains):
        """Test the agent's own move survives the box subtraction."""
        grid = PlanGrid.empty(small_level.height, small_level.width, channel_map.channels)
        grid.acts[1, 1, channel_map.index("agent_short", Action.RIGHT)] = 1.0
        grid.acts[1, 3, channel_map.index("box_short", Action.RIGHT)] = 1.0
        readout, out = readout_action(grid, channel_map, small_level, gains)
        assert readout.action is Action.RIGHT
        assert not readout.no_plan
        assert out.acts[1, 3, channel_map.index("gna", Action.RIGHT)] == -1.0

    def test_ties_go_to_earlier_direction(self, small_level, channel_map, gains):
        """Test equal PNA values resolve in Up, Down, Left, Right order."""
        grid = PlanGrid.empty(small_level.height, small_level.width, channel_map.channels)
        grid.acts[1, 1, channel_map.index("agent_short", Action.RIGHT)] = 1.0
        grid.acts[1, 1, channel_map.index("agent_short", Action.DOWN)] = 1.0
        readout, _ = readout_action(grid, channel_map, small_level, gains)
        assert readout.action is Action.DOWN

    def test_gna_override(self, small_level, channel_map, gains):
        """Test overwriting GNA forces the action."""
        grid = init_plan(small_level, channel_map, gains)
        gna = channel_map.gna
        specs = [
            InterventionSpec(target="plan", channels=(gna[Action.UP.value],), alpha=0.0, c=2.0),
            InterventionSpec(target="plan", channels=tuple(gna[1:]), alpha=0.0, c=-2.0),
        ]
        readout, _ = readout_action(grid, channel_map, small_level, gains, interventions=specs)
        assert readout.action is Action.UP
        assert readout.pna[Action.UP.value] == 2.0

    def test_push_cancels_executed_arrow(self, small_level, channel_map, gains):
        """Test a push zeroes the executed box arrow and the agent channels."""
        before = replay(small_level, actions_from_str("R")).final
        grid = init_plan(before, channel_map, gains)
        grid.acts[1, 2, channel_map.index("agent_short", Action.RIGHT)] = 1.0
        after = step(before, Action.RIGHT).level
        out = apply_transition_update(grid, before, Action.RIGHT, after, channel_map, gains)
        assert out.acts[1, 3, channel_map.index("box_short", Action.RIGHT)] == 0.0
        assert not out.acts[:, :, list(channel_map.agent_short)].any()
        assert out.acts[1, 4, channel_map.entity("box")] == 1.0
        assert out.acts[1, 3, channel_map.entity("box")] == 0.0

    def test_walk_cancels_agent_arrow(self, small_level, channel_map, gains):
        """Test a plain move clears the agent arrow it used."""
        grid = init_plan(small_level, channel_map, gains)
        agent_right = channel_map.index("agent_short", Action.RIGHT)
        grid.acts[1, 1, agent_right] = 1.0
        after = step(small_level, Action.RIGHT).level
        out = apply_transition_update(grid, small_level, Action.RIGHT, after, channel_map, gains)
        assert out.acts[1, 1, agent_right] == 0.0
        assert np.array_equal(
            out.acts[:, :, list(channel_map.box_short)], grid.acts[:, :, list(channel_map.box_short)]
        )

    def test_blocked_action_keeps_plan(self, small_level, channel_map, gains):
        """Test a blocked action changes nothing."""
        grid = init_plan(small_level, channel_map, gains)
        out = apply_transition_update(grid, small_level, Action.UP, small_level, channel_map, gains)
        assert np.array_equal(out.acts, grid.acts)

    def test_inconsistent_pair(self, small_level, channel_map, gains):
        """Test a successor the action cannot produce is refused."""
        grid = init_plan(small_level, channel_map, gains)
        with pytest.raises(InconsistentTransition):
            apply_transition_update(grid, small_level, Action.RIGHT, small_level, channel_map, gains)

    def test_box_value_at_agent_square_is_subtracted(self, small_level, channel_map, gains):
        """Test GNA at the agent square is the agent value minus the box value there."""
        grid = PlanGrid.empty(small_level.height, small_level.width, channel_map.channels)
        grid.acts[1, 1, channel_map.index("agent_short", Action.RIGHT)] = 1.0
        grid.acts[1, 1, channel_map.index("box_short", Action.RIGHT)] = 0.4
        readout, out = readout_action(grid, channel_map, small_level, gains)
        assert out.acts[1, 1, channel_map.index("gna", Action.RIGHT)] == pytest.approx(0.6)
        assert readout.action is Action.RIGHT

    def test_negative_box_value_is_clipped(self, small_level, channel_map, gains):
        """Test a suppressed box unit neither raises the agent's GNA nor lights up elsewhere."""
        grid = PlanGrid.empty(small_level.height, small_level.width, channel_map.channels)
        grid.acts[1, 1, channel_map.index("agent_short", Action.RIGHT)] = 1.0
        grid.acts[1, 1, channel_map.index("box_short", Action.RIGHT)] = -0.8
        grid.acts[2, 4, channel_map.index("box_short", Action.UP)] = -1.5
        readout, out = readout_action(grid, channel_map, small_level, gains)
        assert out.acts[1, 1, channel_map.index("gna", Action.RIGHT)] == pytest.approx(1.0)
        assert out.acts[2, 4, channel_map.index("gna", Action.UP)] == 0.0
        assert readout.pna[Action.UP.value] == 0.0
        assert readout.action is Action.RIGHT

    def test_fallback_is_a_blocked_action(self):
        """Test the fallback is the first action that leaves the level unchanged."""
        level = parse_level("#####\n# . #\n# @ #\n# $ #\n#####")
        assert fallback_action(level) is Action.DOWN
        assert not step(level, Action.DOWN).moved

    def test_fallback_defaults_to_up(self):
        """Test Up is the fallback when every action moves the agent."""
        level = parse_level("#####\n#   #\n# @ #\n#$. #\n#####")
        assert fallback_action(level) is FALLBACK_ACTION


class TestRunPlanner:
    """Test closed-loop episodes."""

    def test_corridor_minimal(self, corridor):
        """Test the corridor is solved in the oracle's number of moves."""
        episode = run_planner(corridor, max_steps=40)
        assert episode.solved
        assert episode.n_actions == solve_oracle(corridor).length
        assert episode.action_string == "RRRR"
        assert replay(corridor, episode.actions).solved

    def test_episode_records(self, corridor):
        """Test grids, levels and readout events line up with the steps."""
        episode = run_planner(corridor, max_steps=40, thinking_steps=2, ticks_per_step=3)
        assert episode.grids[0].tick_index == 6
        assert len(episode.grids) == episode.n_steps + 1
        assert len(episode.levels) == episode.n_actions + 1
        assert len(episode.events_of(TraceKind.READOUT)) == episode.n_actions

    def test_step_limit(self, corridor):
        """Test an exhausted step budget leaves the episode unsolved."""
        episode = run_planner(corridor, max_steps=2)
        assert not episode.solved
        assert episode.n_steps == 2

    def test_no_plan_executes_fallback(self, small_level, channel_map):
        """Test a step without a plan executes the fallback and leaves the level as it was."""
        silence = InterventionSpec(target="plan", channels=tuple(channel_map.gna), alpha=0.0, c=0.0)
        episode = run_planner(small_level, max_steps=5, interventions=[silence])
        assert all(readout.no_plan for readout in episode.readouts)
        assert episode.actions == [Action.UP] * 5
        assert all(episode.acted)
        assert episode.final_level == small_level
        assert not episode.solved

    def test_require_connected_idles_without_plan(self, small_level, channel_map):
        """Test the connected-plan gate idles instead of stepping the fallback."""
        silence = InterventionSpec(target="plan", channels=tuple(channel_map.gna), alpha=0.0, c=0.0)
        episode = run_planner(small_level, max_steps=5, interventions=[silence], require_connected=True)
        assert episode.n_steps == 5
        assert episode.n_actions == 0
        assert not any(episode.acted)

    def test_two_paths_solved(self, two_paths):
        """Test the junction resolves to one route and the level is solved."""
        episode = run_planner(two_paths, max_steps=40)
        assert episode.solved
        assert replay(two_paths, episode.actions).solved

    def test_backtrack_level_solved(self):
        """Test the planner abandons the dead-end arm and pushes the box down the shaft."""
        level = backtrack_level(20)
        episode = run_planner(level, max_steps=120)
        assert episode.solved
        assert replay(level, episode.actions).solved
        assert episode.events_of(TraceKind.BACKTRACK)


class TestSuite:
    """Test the planner on the bundled evaluation suite."""

    def test_solve_rate(self):
        """Test at least 90% of the suite is solved and every solution replays."""
        levels = load_suite()
        episodes = [run_planner(level, max_steps=120, ticks_per_step=3, record_grids=False) for level in levels]
        solved = [episode for episode in episodes if episode.solved]
        assert len(levels) == 50
        assert len(solved) / len(levels) >= 0.9
        for episode in solved:
            assert replay(episode.level, episode.actions).solved


class TestWinnerTakesAll:
    """Test direction competition at the two-route junction."""

    def test_settles_within_limit(self, two_paths, channel_map, gains):
        """Test no square holds two active directions after at most ten ticks."""
        grid = init_plan(two_paths, channel_map, gains)
        ticks = wta_convergence_ticks(grid, two_paths, channel_map, gains)
        assert ticks is not None
        assert ticks <= 10

    def test_one_direction_at_junction(self, two_paths, channel_map, gains):
        """Test the box square keeps exactly one of the two routes."""
        grid = run_static(two_paths, 10, gains=gains, channel_map=channel_map)
        directions = junction_directions(grid, (2, 2), channel_map, gains.threshold)
        assert len(directions) == 1
        assert directions[0] in (Action.DOWN, Action.RIGHT)

    def test_both_routes_without_competition(self, two_paths, channel_map, gains):
        """Test both routes stay active at the junction when competition is off."""
        mechanisms = ENGINE_MECHANISMS - {Mechanism.WTA}
        grid = run_static(two_paths, 10, gains=gains, mechanisms=mechanisms, channel_map=channel_map)
        directions = junction_directions(grid, (2, 2), channel_map, gains.threshold)
        assert {Action.DOWN, Action.RIGHT} <= set(directions)


class TestExperiments:
    """Test planner experiments."""

    def test_steer_gains_scales_extension(self, gains):
        """Test steering multiplies both extension gains and nothing else."""
        steered = steer_gains(gains, 1.2)
        assert steered.lpe_gain == pytest.approx(gains.lpe_gain * 1.2)
        assert steered.tpe_gain == pytest.approx(gains.tpe_gain * 1.2)
        assert steered.decay == gains.decay

    def test_reach_monotone_in_gain(self, gains):
        """Test reach does not shrink as the extension gains grow."""
        factors = (1.0, 1.1, 1.2, 1.3, 1.4)
        reaches = [propagation_reach(steer_gains(gains, f), length=12) for f in factors]
        assert reaches == sorted(reaches)
        assert reaches[0] >= 1

    def test_steering_solves_larger_zigzags(self):
        """Test stronger extension solves a larger zigzag than the default gains."""
        outcomes = zigzag_steering((1.0, 1.2))
        assert len(outcomes) == 10
        assert largest_solved(outcomes, 1.2) > largest_solved(outcomes, 1.0)

    def test_largest_solved_without_solutions(self):
        """Test a factor with no solved level reports size 0."""
        assert largest_solved([], 1.0) == 0

    def test_seed_corridor_too_short(self):
        """Test the seed corridor needs four squares."""
        with pytest.raises(ValueError):
            seed_corridor(3)

    def test_seed_corridor_has_one_seed(self):
        """Test the box's Right push is the only seed on the corridor."""
        mask = seed_mask(seed_corridor(10))
        assert mask.sum() == 1
        assert mask[1, 2, Action.RIGHT.value] == 1.0

    def test_stronger_route_wins(self):
        """Test the more strongly seeded route holds the box square."""
        assert path_preference_experiment(1.2, 0.6, 3, 3).winner is Action.RIGHT
        assert path_preference_experiment(0.6, 1.2, 3, 3).winner is Action.DOWN

    def test_longer_route_wins_at_equal_strength(self):
        """Test the route seeded further toward the target wins when strengths match."""
        assert path_preference_experiment(0.8, 0.8, 6, 2).winner is Action.RIGHT

    def test_symmetric_tie_goes_to_down(self):
        """Test mirror-image routes resolve to the earlier direction."""
        result = path_preference_experiment(0.8, 0.8, 4, 4)
        assert result.winner is Action.DOWN
        assert result.down_strength > result.right_strength

    def test_dead_end_suppresses_arm(self):
        """Test the dead end turns negative and the whole arm falls silent soon after."""
        result = backtracking_experiment(size=20, ticks=30)
        assert result.dead_end_tick is not None
        assert result.suppressed_at is not None
        assert result.suppressed_at - result.dead_end_tick <= len(branch_arrows(20)) + 3
        assert result.dead_end_events >= 1

    def test_forced_dead_end_keeps_arm(self):
        """Test the absolute-value forcing keeps the dead end non-negative and the arm alive."""
        result = backtracking_experiment(size=20, ticks=30, force=True)
        assert len(result.branch_peaks) == 30
        assert not result.negative_at_dead_end
        assert result.suppressed_at is None


class TestCompiledWeights:
    """Test the compiled single-layer network against the engine."""

    def test_single_layer_without_head(self, compiled_weights):
        """Test the compiled weights are one headless layer over the compiled channel count."""
        assert compiled_weights.head is None
        assert compiled_weights.config.layers == 1
        assert compiled_weights.config.ticks == COMPILED_LATENCY + COMPILED_PLAN_TICKS
        assert compiled_weights.channels == COMPILED_CHANNELS

    def test_layout_uses_spare_channels(self, compiled_map):
        """Test mask, READY and comparator units sit on distinct spare channels."""
        layout = compiled_layout(compiled_map)
        channels = [layout.blocked]
        for group in (layout.stop, layout.push, layout.reach1, layout.reach2, layout.seed, layout.ready):
            channels.extend(group)
        channels.extend(layout.comparator_channels)
        assert len(channels) == len(set(channels)) == 37
        assert set(channels) <= set(compiled_map.spare)
        assert len(layout.comparators) == 12
        assert layout.comparator(Action.UP.value, Action.DOWN.value) in layout.comparator_channels

    @pytest.mark.parametrize(
        "level",
        [*VALIDATION_LEVELS, two_paths_level()],
        ids=lambda level: level.level_id,
    )
    def test_matches_engine(self, level, compiled_weights, compiled_map):
        """Test compiled box activations and decoded plans match the engine tick for tick."""
        gains = MechanismGains()
        seeds = seed_mask(level, local=True)
        grids = compiled_trajectory(compiled_weights, level, compiled_map, gains, COMPILED_LATENCY + 10)
        assert len(grids) == 11
        box_short = list(compiled_map.box_short)
        engine = init_plan(level, compiled_map, gains, seeds=seeds, mechanisms=COMPILED_MECHANISMS)
        for tick, compiled in enumerate(grids):
            if tick:
                engine, _ = tick_plan(engine, level, compiled_map, gains, COMPILED_MECHANISMS, seeds=seeds)
            assert compiled.tick_index == tick
            assert np.allclose(compiled.acts[:, :, box_short], engine.acts[:, :, box_short], atol=1e-6)
            compiled_plan = decode_plan(compiled, compiled_map, gains.threshold)
            engine_plan = decode_plan(engine, compiled_map, gains.threshold)
            assert compiled_plan.short_arrows() == engine_plan.short_arrows()

    def test_trajectory_needs_latency(self, compiled_weights, compiled_map, gains):
        """Test a run shorter than the perception latency has no plan ticks to report."""
        with pytest.raises(ValueError):
            compiled_trajectory(compiled_weights, corridor_level(6), compiled_map, gains, COMPILED_LATENCY - 1)

    def test_compiled_reach_matches_engine(self, compiled_weights, compiled_map, gains):
        """Test the compiled network extends the corridor seed as far as the engine."""
        engine = propagation_reach(gains, length=8)
        compiled = propagation_reach(gains, length=8, weights=compiled_weights, channel_map=compiled_map)
        assert compiled == engine

    def test_compiled_policy_solves_corridor(self, compiled_weights, compiled_map, gains):
        """Test the compiled network plays a corridor through the plan readout."""
        policy = DrcPolicy(compiled_weights, gains, channel_map=compiled_map)
        episode = run_drc(policy, corridor_level(6), max_steps=10)
        assert episode.solved

    @pytest.mark.parametrize("channels", [MIN_CHANNELS, 32])
    def test_needs_spare_channels(self, channels, gains):
        """Test a map without room for the mask and comparator units cannot be compiled."""
        with pytest.raises(CompilationError):
            compile_to_weights(default_channel_map(channels), gains)

    def test_weak_stop_gain(self, compiled_map):
        """Test a stop gain too weak to close the gates is refused."""
        with pytest.raises(CompilationError):
            compile_to_weights(compiled_map, MechanismGains(stop_gain=-0.5))

    def test_weak_wta_inhibit(self, compiled_map):
        """Test inhibition too weak to close a beaten gate is refused."""
        with pytest.raises(CompilationError):
            compile_to_weights(compiled_map, MechanismGains(wta_inhibit=0.3))

    def test_unknown_scope(self, compiled_map, gains):
        """Test only the extension, stopping and WTA scope compiles."""
        with pytest.raises(CompilationError):
            compile_to_weights(compiled_map, gains, scope="everything")
