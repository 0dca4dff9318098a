"""Tests for static outputs, batch evaluation, run manifests and the bundled suite."""

import io
import json

import numpy as np
import pytest

from sokoban_planning_lab.config import LabConfig
from sokoban_planning_lab.errors import EmptyDatasetError, InterventionAddressError, SolverMismatch
from sokoban_planning_lab.harness.dump import (
    diverging_rgb,
    dump_heatmap,
    export_episode,
    read_channel_csv,
    read_ppm,
    write_jsonl,
    write_rows,
)
from sokoban_planning_lab.harness.evaluate import Evaluator, SolverKind, evaluate
from sokoban_planning_lab.harness.manifest import MANIFEST_FILE, RunManifest
from sokoban_planning_lab.harness.suite import SUITE_PATH, SUITE_SPEC, load_suite, suite_levels, write_suite
from sokoban_planning_lab.planner.channels import default_channel_map
from sokoban_planning_lab.planner.runner import run_planner
from sokoban_planning_lab.sokoban.oracle import solve_oracle


class TestDump:
    """Test heatmaps, CSV tables and trace files."""

    def test_diverging_colours(self):
        """Test the sign of a value picks its colour and zero is white."""
        rgb = diverging_rgb(np.array([[-2.0, 0.0, 2.0]]))
        assert rgb[0, 0].tolist() == [0, 0, 255]
        assert rgb[0, 1].tolist() == [255, 255, 255]
        assert rgb[0, 2].tolist() == [255, 0, 0]

    def test_all_zero_is_white(self):
        """Test a blank channel renders without dividing by zero."""
        rgb = diverging_rgb(np.zeros((2, 2)))
        assert (rgb == 255).all()

    def test_heatmap_files(self, temp_dir):
        """Test the image has one pixel per square and the table keeps exact values."""
        tensor = np.zeros((3, 4, 2))
        tensor[1, 2, 1] = 0.125
        tensor[2, 0, 1] = -1.5
        image, table = dump_heatmap(tensor, 1, temp_dir / "maps" / "h1")
        assert image.name == "h1.ppm"
        assert table.name == "h1.csv"
        assert read_ppm(image).shape == (3, 4, 3)
        np.testing.assert_array_equal(read_channel_csv(table, 3, 4), tensor[:, :, 1])

    def test_heatmap_bad_channel(self, temp_dir):
        """Test a channel outside the tensor is refused."""
        with pytest.raises(InterventionAddressError):
            dump_heatmap(np.zeros((3, 3, 2)), 2, temp_dir / "bad")

    def test_write_rows_to_sink(self):
        """Test rows go to a stream with a header from the first row."""
        sink = io.StringIO()
        write_rows(None, [{"a": 1, "b": 2}, {"a": 3, "b": 4}], sink=sink)
        assert sink.getvalue() == "a,b\n1,2\n3,4\n"

    def test_write_rows_header_only(self, temp_dir):
        """Test an empty table with field names still gets its header."""
        path = temp_dir / "empty.csv"
        write_rows(path, [], fieldnames=("x", "y"))
        assert path.read_text() == "x,y\n"

    def test_write_jsonl(self, temp_dir):
        """Test one sorted JSON object per line."""
        path = temp_dir / "trace.jsonl"
        count = write_jsonl(path, [{"b": 1, "a": 2}, {"c": 3}])
        assert count == 2
        lines = path.read_text().splitlines()
        assert lines[0] == '{"a": 2, "b": 1}'
        assert json.loads(lines[1]) == {"c": 3}

    def test_export_episode(self, temp_dir, corridor):
        """Test an engine episode writes activations, a trace and heatmaps."""
        channel_map = default_channel_map()
        episode = run_planner(corridor, max_steps=10, channel_map=channel_map)
        written = export_episode(episode, temp_dir / "episode", channel_map)
        activations = written["csv"][0]
        assert activations.read_text().splitlines()[0] == "grid,role,row,col,value"
        assert written["trace"][0].exists()
        assert len(written["heatmaps"]) == len(episode.grids) * len(channel_map.group("box_short"))

    def test_export_without_heatmaps(self, temp_dir, corridor):
        """Test heatmaps can be skipped."""
        channel_map = default_channel_map()
        episode = run_planner(corridor, max_steps=10, channel_map=channel_map)
        written = export_episode(episode, temp_dir / "episode", channel_map, heatmaps=False)
        assert written["heatmaps"] == []
        assert not (temp_dir / "episode" / "heatmaps").exists()


class TestEvaluate:
    """Test batch evaluation."""

    def test_oracle_in_input_order(self, small_level, corridor, two_paths):
        """Test outcomes keep the input order and carry the oracle's solutions."""
        levels = [corridor, small_level, two_paths]
        stats = evaluate(SolverKind.ORACLE, levels, config=LabConfig(workers=2))
        assert [o.index for o in stats.outcomes] == [0, 1, 2]
        assert [o.level_id for o in stats.outcomes] == [level.level_id for level in levels]
        assert stats.n_solved == 3
        assert stats.solve_rate == 1.0
        assert stats.outcomes[1].actions == "RRR"
        assert stats.outcomes[0].n_actions == solve_oracle(corridor).length

    def test_synthetic_solves_corridor(self, corridor):
        """Test the planner solves a corridor within its step limit."""
        stats = evaluate(SolverKind.SYNTHETIC, [corridor])
        assert stats.n_solved == 1
        assert stats.outcomes[0].actions == "RRRR"

    def test_summary_keys(self, small_level):
        """Test the summary record carries the rate and its interval."""
        record = evaluate(SolverKind.ORACLE, [small_level]).to_dict()
        assert record["solver"] == "oracle"
        assert record["n_levels"] == 1
        assert record["ci_low"] == record["ci_high"] == 1.0

    def test_empty_level_set(self):
        """Test evaluating nothing is refused."""
        with pytest.raises(EmptyDatasetError):
            evaluate(SolverKind.ORACLE, [])

    def test_drc_needs_weights(self):
        """Test the drc solver refuses to start without weights."""
        with pytest.raises(SolverMismatch):
            Evaluator(SolverKind.DRC)

    def test_weights_only_for_drc(self, small_weights):
        """Test weights given to another solver are refused."""
        with pytest.raises(SolverMismatch):
            Evaluator(SolverKind.ORACLE, weights=small_weights)

    @pytest.mark.asyncio
    async def test_evaluate_async(self, small_level, corridor):
        """Test the coroutine form inside a running event loop."""
        evaluator = Evaluator(SolverKind.ORACLE, config=LabConfig(workers=1))
        stats = await evaluator.evaluate_async([small_level, corridor])
        assert stats.n_levels == 2
        assert stats.mean_steps == pytest.approx((3 + solve_oracle(corridor).length) / 2)


class TestManifest:
    """Test run manifests."""

    def test_hash_is_stable(self):
        """Test equal manifests hash equally and any change moves the hash."""
        first = RunManifest(command="solve", config=LabConfig(), level_set="suite")
        second = RunManifest(command="solve", config=LabConfig(), level_set="suite")
        changed = RunManifest(command="solve", config=LabConfig(seed=1), level_set="suite")
        assert first.hash() == second.hash()
        assert first.hash() != changed.hash()
        assert len(first.hash()) == 64

    def test_write_includes_hash(self, temp_dir):
        """Test the written manifest carries its own hash and seed."""
        manifest = RunManifest(command="evaluate", config=LabConfig(seed=5), level_set="levels.txt")
        path = manifest.write(temp_dir / "out")
        assert path.name == MANIFEST_FILE
        record = json.loads(path.read_text())
        assert record["hash"] == manifest.hash()
        assert record["config"]["seed"] == 5
        assert manifest.seed == 5


class TestSuite:
    """Test the bundled evaluation suite."""

    def test_fifty_levels(self):
        """Test the suite size and unique ids."""
        levels = suite_levels()
        assert len(levels) == len(SUITE_SPEC) == 50
        assert len({level.level_id for level in levels}) == 50

    def test_bundled_file_matches_generators(self):
        """Test the checked-in suite file holds exactly the levels SUITE_SPEC builds."""
        assert SUITE_PATH.is_file()
        assert load_suite() == suite_levels()

    def test_bundled_mix(self):
        """Test the suite kinds: corridors, turns, two-box corridors, zigzags, two_paths and backtrack."""
        kinds = [level.level_id.split("-", 2)[2].rsplit("-", 1)[0] for level in load_suite()]
        assert kinds.count("corridor") == 14
        assert kinds.count("turn") == 14
        assert kinds.count("two_box") == 15
        assert kinds.count("zigzag") == 5
        assert kinds[-2:] == ["two_paths", "backtrack"]

    def test_written_suite_reloads(self, temp_dir):
        """Test the written file and the directory both load the bundled levels."""
        path = write_suite(temp_dir)
        assert load_suite(path) == load_suite()
        assert load_suite(temp_dir) == load_suite()
