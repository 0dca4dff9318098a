"""Tests for the interpretability toolkit."""

import numpy as np
import pytest

from sokoban_planning_lab.config import DrcConfig, MechanismGains
from sokoban_planning_lab.drc.network import drc_forward, zero_state
from sokoban_planning_lab.drc.weights import WeightSet
from sokoban_planning_lab.errors import (
    AblationSourceError,
    CompilationError,
    ConfigError,
    DegenerateDataError,
    EmptyDatasetError,
    InterventionAddressError,
    ShapeMismatch,
    SolverMismatch,
)
from sokoban_planning_lab.harness.suite import load_suite
from sokoban_planning_lab.interp.ablation import (
    apply_ablation,
    mean_replacements,
    wta_slices,
    zero_kernel_slices,
)
from sokoban_planning_lab.interp.effects import direct_effect, reconstruct_pre
from sokoban_planning_lab.interp.encoder import combine_encoder, interior_error
from sokoban_planning_lab.interp.features import (
    BASE_FEATURES,
    FUTURE_FEATURES,
    RecordedStep,
    build_features,
    steps_from_episode,
)
from sokoban_planning_lab.interp.intervene import (
    EngineContext,
    causal_intervene,
    collect_engine_transitions,
    group_protocol,
    intervention_score,
)
from sokoban_planning_lab.interp.probes import (
    auc_probe,
    classify_horizon,
    movement_labels,
    train_action_probe,
)
from sokoban_planning_lab.interp.regression import (
    MIN_OFFSET_EPISODES,
    OFFSETS,
    fit_offsets,
    label_regression,
    offset_regression,
    shift_grid,
)
from sokoban_planning_lab.interp.rollout import DrcPolicy, run_drc
from sokoban_planning_lab.interp.stats import bootstrap_ci
from sokoban_planning_lab.interp.steering import steer_weights
from sokoban_planning_lab.planner.channels import default_channel_map
from sokoban_planning_lab.planner.compile import COMPILED_CHANNELS, compiled_layout
from sokoban_planning_lab.planner.runner import run_planner
from sokoban_planning_lab.sokoban.engine import replay
from sokoban_planning_lab.sokoban.level import Action, actions_from_str
from sokoban_planning_lab.sokoban.render import render_rgb
from sokoban_planning_lab.specs import AblationMode, AblationSpec, InterventionSpec, KernelSlice


def corridor_steps(corridor, activations_for):
    """Recorded steps along the corridor's RRRR solution."""
    actions = actions_from_str("RRRR")
    levels = replay(corridor, actions).levels
    steps = []
    for t in range(len(actions)):
        placeholder = np.zeros((corridor.height, corridor.width, 1))
        step = RecordedStep(level=levels[t], activations=placeholder, future=actions[t:])
        step.activations = activations_for(step)
        steps.append(step)
    return steps


class TestEncoderFolding:
    """Test folding the encoder into a gate kernel."""

    @pytest.mark.parametrize("seed", range(5))
    def test_interior_matches_two_stage(self, seed):
        """Test the folded kernel equals encoder then gate away from the edge."""
        rng = np.random.default_rng(seed)
        config = DrcConfig(layers=1, ticks=1, channels=4, height=12, width=12)
        weights = WeightSet.random(config, rng, scale=0.5, with_head=False)
        obs = rng.uniform(size=(12, 12, 3))
        assert interior_error(obs, weights, 0, "j") < 1e-8

    def test_combined_shape(self, headless_weights):
        """Test the folded kernel is a centered 9x9 over the three colour channels."""
        combined = combine_encoder(headless_weights, 1, "o")
        assert combined.kernel.shape == (9, 9, 3, 4)
        assert combined.origin == (4, 4)

    def test_bad_address(self, headless_weights):
        """Test an unknown gate or layer is refused."""
        with pytest.raises(ShapeMismatch):
            combine_encoder(headless_weights, 0, "x")
        with pytest.raises(ShapeMismatch):
            combine_encoder(headless_weights, 5, "i")

    def test_grid_too_small(self, headless_weights, two_paths):
        """Test a grid without interior squares is refused."""
        with pytest.raises(ShapeMismatch):
            interior_error(render_rgb(two_paths), headless_weights, 0, "i")


class TestDirectEffect:
    """Test per-input contributions to a gate."""

    def test_contributions_sum_to_pre_activation(self, small_weights, two_paths):
        """Test every contribution plus the bias gives the recorded pre-activation."""
        result = drc_forward(zero_state(2, 4, 5, 5), render_rgb(two_paths), small_weights, record=True)
        record = result.records[-1]
        for channel in range(4):
            assert np.allclose(reconstruct_pre(record, small_weights, "f", channel), record.pre["f"][:, :, channel])

    def test_ranked_strongest_first(self, small_weights, two_paths):
        """Test the ranking is by decreasing magnitude."""
        result = drc_forward(zero_state(2, 4, 5, 5), render_rgb(two_paths), small_weights, record=True)
        effects = direct_effect(result.records[-1], small_weights, "i", 0, top=5)
        assert len(effects) == 5
        magnitudes = [e.max_abs for e in effects]
        assert magnitudes == sorted(magnitudes, reverse=True)

    def test_needs_recording(self, small_weights):
        """Test a missing record is an empty dataset."""
        with pytest.raises(EmptyDatasetError):
            direct_effect(None, small_weights, "i", 0)


class TestSteering:
    """Test recurrent weight scaling."""

    def test_factor_one_is_identity(self, small_weights):
        """Test a factor of one returns the weights unchanged."""
        assert steer_weights(small_weights, 1.0) is small_weights

    def test_scales_recurrent_only(self, small_weights):
        """Test Wh1 and Wh2 scale while We and the input stay put."""
        original = small_weights.layers[0].gates["i"].Wh1.copy()
        steered = steer_weights(small_weights, 2.0)
        gate = steered.layers[0].gates["i"]
        assert np.array_equal(gate.Wh1, 2.0 * original)
        assert np.array_equal(gate.We, small_weights.layers[0].gates["i"].We)
        assert np.array_equal(small_weights.layers[0].gates["i"].Wh1, original)

    def test_single_kernel(self, small_weights):
        """Test steering one kernel leaves the other alone."""
        steered = steer_weights(small_weights, 1.5, targets=("Wh2",))
        assert np.array_equal(steered.layers[1].gates["o"].Wh1, small_weights.layers[1].gates["o"].Wh1)
        assert np.allclose(steered.layers[1].gates["o"].Wh2, 1.5 * small_weights.layers[1].gates["o"].Wh2)

    @pytest.mark.parametrize("factor, targets", [(0.0, ("Wh1", "Wh2")), (1.2, ("We",)), (1.2, ())])
    def test_invalid(self, small_weights, factor, targets):
        """Test non-positive factors and unknown kernels are refused."""
        with pytest.raises(ConfigError):
            steer_weights(small_weights, factor, targets=targets)


class TestStats:
    """Test bootstrap intervals."""

    def test_constant_values(self):
        """Test a constant sample has a zero-width interval at its value."""
        ci = bootstrap_ci([1.0] * 20)
        assert ci.estimate == ci.low == ci.high == 1.0
        assert ci.width == 0.0

    def test_interval_contains_mean(self):
        """Test the interval brackets the sample mean."""
        values = np.random.default_rng(0).normal(size=200)
        ci = bootstrap_ci(values, rng=np.random.default_rng(1))
        assert ci.low <= ci.estimate <= ci.high

    def test_empty(self):
        """Test an empty sample is refused."""
        with pytest.raises(EmptyDatasetError):
            bootstrap_ci([])


class TestOffsetRegression:
    """Test offset regression on planted data."""

    def test_recovers_every_offset(self):
        """Test one planted channel per offset is matched to its offset."""
        rng = np.random.default_rng(0)
        features = [rng.integers(0, 2, size=(7, 7, 17)).astype(float) for _ in range(12)]
        activations = [
            np.stack([shift_grid(f, dr, dc)[:, :, k % 17] for k, (dr, dc) in enumerate(OFFSETS)], axis=2)
            for f in features
        ]
        report = fit_offsets(activations, features)
        for k, offset in enumerate(OFFSETS):
            row = report.row(k)
            assert row.offset == offset
            assert row.correlation > 0.999

    def test_constant_channel_flagged(self):
        """Test a constant channel gets offset (0, 0) and a flag."""
        rng = np.random.default_rng(1)
        features = [rng.integers(0, 2, size=(5, 5, 17)).astype(float) for _ in range(4)]
        activations = [np.ones((5, 5, 1)) for _ in features]
        row = fit_offsets(activations, features).row(0)
        assert row.offset == (0, 0)
        assert row.flags == ["constant"]

    def test_mismatched_lengths(self):
        """Test activation and feature lists must align."""
        with pytest.raises(ShapeMismatch):
            fit_offsets([np.zeros((3, 3, 1))], [])

    def test_too_few_episodes(self, corridor):
        """Test recorded steps from fewer episodes than the minimum are refused."""
        steps = corridor_steps(corridor, lambda s: np.zeros((corridor.height, corridor.width, 1)))
        with pytest.raises(DegenerateDataError):
            offset_regression(steps)

    def test_enough_episodes(self, corridor):
        """Test steps tagged with enough distinct episodes are fitted."""
        steps = []
        for index in range(MIN_OFFSET_EPISODES):
            for step in corridor_steps(corridor, lambda s: build_features([s]).full(0)[:, :, :1]):
                step.episode = index
                steps.append(step)
        report = offset_regression(steps)
        assert len(report.rows) == 1
        assert report.n_samples == MIN_OFFSET_EPISODES * 4 * corridor.height * corridor.width

    def test_shift_grid(self):
        """Test shifting moves values down and right with zero fill."""
        x = np.arange(9, dtype=float).reshape(3, 3, 1)
        out = shift_grid(x, 1, 1)[:, :, 0]
        assert out.tolist() == [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 3.0, 4.0]]


class TestLabelRegression:
    """Test correlation with and without future features."""

    def test_planted_future_feature(self, corridor):
        """Test a channel made of a future feature is explained by the full fit."""
        index = len(BASE_FEATURES) + FUTURE_FEATURES.index("box_move_right")
        probe_steps = corridor_steps(corridor, lambda s: np.zeros((corridor.height, corridor.width, 1)))
        features = build_features(probe_steps)
        steps = corridor_steps(
            corridor, lambda s: 2.0 * build_features([s]).full(0)[:, :, index : index + 1] + 0.5
        )
        row = label_regression(steps, features=features).row(0)
        assert row.full >= 0.999
        assert row.full >= row.base

    def test_no_steps(self):
        """Test an empty step list is refused."""
        with pytest.raises(EmptyDatasetError):
            label_regression([])


class TestAucProbe:
    """Test single-channel AUC."""

    def test_perfect_channel(self, corridor):
        """Test a channel equal to its label has AUC 1."""
        steps = corridor_steps(
            corridor, lambda s: movement_labels(s, Action.RIGHT, 10, "short", "box")[:, :, None].astype(float)
        )
        row = auc_probe(steps, {0: Action.RIGHT}, horizons=(10,)).get(0, 10)
        assert row.auc == 1.0
        assert row.polarity == 1
        assert row.flags == []

    def test_negative_polarity(self, corridor):
        """Test an inverted channel is read with polarity -1."""
        steps = corridor_steps(
            corridor, lambda s: -movement_labels(s, Action.RIGHT, 10, "short", "box")[:, :, None].astype(float)
        )
        row = auc_probe(steps, {0: Action.RIGHT}, horizons=(10,)).get(0, 10)
        assert row.polarity == -1
        assert row.auc == 1.0

    def test_single_class(self, corridor):
        """Test a direction that never happens gives NaN and flags."""
        steps = corridor_steps(corridor, lambda s: np.zeros((corridor.height, corridor.width, 1)))
        row = auc_probe(steps, {0: Action.UP}, horizons=(10,)).get(0, 10)
        assert np.isnan(row.auc)
        assert "single_class" in row.flags
        assert "polarity_undefined" in row.flags

    def test_bad_variant(self, corridor):
        """Test unknown variants are refused."""
        steps = corridor_steps(corridor, lambda s: np.zeros((corridor.height, corridor.width, 1)))
        with pytest.raises(ValueError):
            auc_probe(steps, {0: Action.UP}, variant="medium")

    def test_planner_right_channel_predicts_pushes(self):
        """Test the planner's Right box channel predicts Right pushes within ten steps."""
        channel_map = default_channel_map()
        levels = [level for level in load_suite() if "-corridor-" in level.level_id or "-turn-" in level.level_id]
        steps = []
        for index, level in enumerate(levels):
            episode = run_planner(level)
            steps.extend(steps_from_episode(episode, channel_map, "box_short", index=index))
        row = auc_probe(steps, {Action.RIGHT.value: Action.RIGHT}, horizons=(10,)).get(Action.RIGHT.value, 10)
        assert len(levels) == 28
        assert row.polarity == 1
        assert row.auc >= 0.95

    def test_classify_horizon(self):
        """Test the AUC peak picks the horizon class."""
        assert classify_horizon([(1, 0.6), (5, 0.9), (20, 0.7)]) == "short"
        assert classify_horizon([(5, 0.6), (30, 0.9)]) == "long"
        assert classify_horizon([(5, float("nan"))]) is None


class TestActionProbe:
    """Test the linear action probe."""

    def test_separable_actions(self):
        """Test one-hot features are classified perfectly."""
        rng = np.random.default_rng(0)
        actions = rng.integers(0, 4, size=1000)
        features = np.eye(4)[actions]
        fit = train_action_probe(features, actions)
        assert fit.accuracy == 1.0
        assert fit.n_train + fit.n_test == 1000
        assert fit.probe.weight.shape == (4, 4)

    def test_too_few_samples(self):
        """Test small datasets are refused."""
        with pytest.raises(EmptyDatasetError):
            train_action_probe(np.zeros((10, 4)), [0] * 10)

    def test_non_finite(self):
        """Test NaN features are refused."""
        features = np.zeros((1000, 2))
        features[3, 1] = np.nan
        with pytest.raises(DegenerateDataError):
            train_action_probe(features, [0] * 1000)


class TestInterventions:
    """Test causal interventions on engine transitions."""

    @pytest.fixture
    def transitions(self, corridor):
        return collect_engine_transitions([corridor])

    def test_transitions_follow_the_plan(self, transitions, corridor):
        """Test every recorded transition is a planned push along the corridor."""
        assert len(transitions) == 4
        assert all(t.action is Action.RIGHT for t in transitions)
        assert transitions[0].level == corridor

    def test_identity_changes_nothing(self, transitions):
        """Test an identity edit leaves every action as it was."""
        context = EngineContext()
        identity = [InterventionSpec(target="plan", alpha=1.0, c=0.0)]
        assert transitions
        for transition in transitions:
            assert not causal_intervene(context, transition, identity).changed

    @pytest.mark.parametrize("group", ["pna", "gna"])
    def test_readout_protocols_always_hit(self, transitions, group):
        """Test PNA and GNA edits always produce their target action."""
        gains = MechanismGains()
        protocol = group_protocol(group, default_channel_map(), gains)
        score = intervention_score(EngineContext(gains=gains), transitions, protocol, group=group, min_transitions=1)
        assert score.percent.estimate == 100.0
        assert score.n == len(transitions)
        assert score.reference is not None

    def test_too_few_transitions(self, transitions):
        """Test scoring needs the minimum number of transitions."""
        protocol = group_protocol("pna", default_channel_map(), MechanismGains())
        with pytest.raises(EmptyDatasetError):
            intervention_score(EngineContext(), transitions, protocol, min_transitions=len(transitions) + 1)

    def test_unknown_group(self):
        """Test unknown protocol groups are refused."""
        with pytest.raises(ValueError):
            group_protocol("value", default_channel_map(), MechanismGains())


class TestDrcRollout:
    """Test episodes driven by network weights."""

    def test_deterministic(self, small_weights, two_paths):
        """Test two rollouts of the same weights take the same actions."""
        first = run_drc(DrcPolicy(small_weights), two_paths, max_steps=6)
        second = run_drc(DrcPolicy(small_weights), two_paths, max_steps=6)
        assert first.episode.action_string == second.episode.action_string
        assert len(first.steps) == first.episode.n_steps

    def test_headless_needs_matching_map(self, headless_weights):
        """Test headless weights must match the plan channel layout."""
        with pytest.raises(SolverMismatch):
            DrcPolicy(headless_weights, channel_map=default_channel_map())


class TestAblation:
    """Test ablation plumbing."""

    def test_mean_replacements(self):
        """Test the table has one entry per tick with the broadcast mean."""
        means = {"c.0": np.array([1.0, 2.0])}
        table = mean_replacements(means, "c", [0], (0, 2), 3, 4)
        assert set(table) == {("c", 0, 0), ("c", 0, 2)}
        channels, value = table[("c", 0, 2)]
        assert channels == ()
        assert value.shape == (3, 4, 2)
        assert np.all(value[:, :, 1] == 2.0)

    def test_missing_mean(self):
        """Test a tensor absent from the mean source is an error."""
        with pytest.raises(AblationSourceError):
            mean_replacements({}, "f", [0], (0,), 3, 3)

    def test_zero_kernel_copies(self, small_weights):
        """Test zeroing a slice leaves the input weights intact."""
        before = small_weights.layers[0].gates["j"].Wh2[:, :, 1, 2].copy()
        zeroed = zero_kernel_slices(small_weights, [KernelSlice(0, "j", "Wh2", 1, 2)])
        assert not zeroed.layers[0].gates["j"].Wh2[:, :, 1, 2].any()
        assert np.array_equal(small_weights.layers[0].gates["j"].Wh2[:, :, 1, 2], before)

    def test_zero_kernel_out_of_range(self, small_weights):
        """Test a slice outside the kernel is refused."""
        with pytest.raises(InterventionAddressError):
            zero_kernel_slices(small_weights, [KernelSlice(0, "j", "Wh2", 40, 0)])

    def test_wta_slices(self):
        """Test every ordered pair of distinct directions has a comparator-to-box slice."""
        channel_map = default_channel_map(COMPILED_CHANNELS)
        comparators = set(compiled_layout(channel_map).comparator_channels)
        slices = wta_slices(channel_map)
        assert len(slices) == 12
        assert all(s.gate == "j" and s.kernel == "Wh2" for s in slices)
        assert {s.in_channel for s in slices} == comparators
        assert {s.out_channel for s in slices} == set(channel_map.box_short)

    def test_wta_slices_need_compiled_layout(self):
        """Test a map without room for comparators has no WTA slices."""
        with pytest.raises(CompilationError):
            wta_slices(default_channel_map())

    def test_mean_ablation_needs_source(self, small_weights, two_paths):
        """Test mean ablation without a mean source is refused."""
        spec = AblationSpec(mode=AblationMode.MEAN_ACTIVATION, tensor="c")
        with pytest.raises(AblationSourceError):
            apply_ablation(small_weights, spec, [two_paths], max_steps=3)

    def test_zero_kernel_ablation(self, small_weights, two_paths):
        """Test an ablation run reports both solve counts over the level set."""
        spec = AblationSpec(mode=AblationMode.ZERO_KERNEL, slices=(KernelSlice(0, "f", "Wh2", 0, 0),))
        result = apply_ablation(small_weights, spec, [two_paths], max_steps=3)
        assert result.n_levels == 1
        assert result.baseline_solved in (0, 1)
        assert result.ablated_solved in (0, 1)
        assert result.delta == result.baseline_rate - result.ablated_rate
