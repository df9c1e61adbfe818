import numpy as np
import pytest
import yaml

from taskalg import cli
from taskalg.errors import IncompatibleTables, InvalidEnvironment
from taskalg.io import (
    export_qtable_text,
    import_qtable_text,
    load_env,
    load_qtable,
    load_report,
    read_qtable_meta,
    save_env,
    save_qtable,
    save_report,
)
from taskalg.planner import extract_policy
from taskalg.presets import STAR, example_world, split_route_world
from taskalg.runtime import rollout


@pytest.fixture()
def env_file(tmp_path):
    path = tmp_path / "world.yaml"
    save_env(example_world(), path)
    return path


class TestEnvFiles:
    def test_round_trip(self, env_file, world):
        loaded = load_env(env_file)
        assert loaded.fingerprint() == world.fingerprint()
        assert loaded.start == world.start
        assert loaded.propositions == world.propositions

    def test_hand_written_document(self, tmp_path):
        doc = {
            "schema": 1,
            "width": 2,
            "height": 2,
            "propositions": ["A"],
            "cells": [{"x": 0, "y": 1, "labels": ["A"]}],
        }
        path = tmp_path / "tiny.yaml"
        path.write_text(yaml.safe_dump(doc))
        m = load_env(path)
        assert m.n_regions == 1 and m.start is None

    @pytest.mark.parametrize(
        "doc",
        [
            {"schema": 99, "width": 2, "height": 2},
            {"width": 2},
            {"width": 2, "height": 2, "cells": [{"x": 0}]},
            {"width": 2, "height": 2, "cells": [{"x": 5, "y": 0, "labels": ["A"]}]},
        ],
    )
    def test_bad_documents_rejected(self, tmp_path, doc):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump(doc))
        with pytest.raises(InvalidEnvironment):
            load_env(path)


class TestQtableFiles:
    def test_bit_exact_round_trip(self, tmp_path, world, library):
        table = library["not-A"]
        path = tmp_path / "not-A.qtab"
        save_qtable(table, path, task={"key": "not-A"})
        loaded = load_qtable(path, world)
        assert np.array_equal(loaded.values, table.values)
        assert loaded.config == table.config
        assert loaded.descriptor == table.descriptor
        assert loaded.grid == (world.width, world.height)
        assert read_qtable_meta(path)["task"] == {"key": "not-A"}

    def test_environment_mismatch_rejected(self, tmp_path, library):
        path = tmp_path / "A.qtab"
        save_qtable(library["A"], path)
        other = split_route_world()
        with pytest.raises(IncompatibleTables):
            load_qtable(path, other)

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "junk.qtab"
        path.write_bytes(b"oops" * 10)
        with pytest.raises(IncompatibleTables):
            load_qtable(path)

    def test_text_export_lossless(self, library):
        table = library["C"]
        text = export_qtable_text(table)
        assert np.array_equal(import_qtable_text(text), table.values)


class TestReportFiles:
    def test_round_trip(self, tmp_path, world, library):
        pol = extract_policy(library["C"], world)
        rep = rollout(world, pol, (4, 3))
        path = tmp_path / "rep.yaml"
        save_report(rep, world, path)
        loaded = load_report(path, world)
        assert loaded.execution.steps == rep.execution.steps
        assert loaded.actions == rep.actions
        assert loaded.execution.terminal_region == rep.execution.terminal_region


@pytest.fixture()
def trained_lib_dir(tmp_path, env_file):
    lib = tmp_path / "lib"
    lib.mkdir()
    for key in ("A", "B", "C", "not-A", "not-B", "U", "EMPTY"):
        rc = cli.main(
            ["train", "--env", str(env_file), "--task", key, "--lib", str(lib)]
        )
        assert rc == 0
    return lib


class TestCli:
    def test_cp_prints_multiplier(self, env_file, capsys):
        assert cli.main(["cp", "--env", str(env_file)]) == 0
        out = capsys.readouterr().out
        assert "C_p = 8" in out and "literal" in out

    def test_cp_without_regions_exits_2(self, tmp_path, capsys):
        doc = {"schema": 1, "width": 3, "height": 3, "cells": []}
        path = tmp_path / "empty.yaml"
        path.write_text(yaml.safe_dump(doc))
        assert cli.main(["cp", "--env", str(path)]) == 2

    def test_missing_env_exits_2(self, tmp_path):
        assert cli.main(["cp", "--env", str(tmp_path / "nope.yaml")]) == 2

    def test_train_nonconvergence_exits_3(self, env_file, tmp_path):
        rc = cli.main(
            ["train", "--env", str(env_file), "--task", "A",
             "--out", str(tmp_path / "a.qtab"), "--max-sweeps", "1"]
        )
        assert rc == 3

    def test_compose_missing_task_exits_4(self, env_file, tmp_path):
        lib = tmp_path / "lib"
        lib.mkdir()
        rc = cli.main(
            ["compose", "--env", str(env_file), "--task", "A | B", "--lib", str(lib)]
        )
        assert rc == 4

    def test_compose_run_classify_flow(self, env_file, trained_lib_dir, tmp_path, capsys):
        out_table = tmp_path / "mv.qtab"
        rc = cli.main(
            ["compose", "--env", str(env_file), "--task", "!A & C",
             "--semantics", "min-violation", "--lib", str(trained_lib_dir),
             "--out", str(out_table)]
        )
        assert rc == 0
        report = tmp_path / "rep.yaml"
        rc = cli.main(
            ["run", "--env", str(env_file), "--task", str(out_table),
             "--start", "0,0", "--out", str(report)]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "class: MinimumViolation" in out
        rc = cli.main(
            ["classify", "--env", str(env_file), "--task", "!A & C",
             "--report", str(report)]
        )
        assert rc == 0
        assert "MinimumViolation" in capsys.readouterr().out

    def test_run_formula_uses_env_var_library(
        self, env_file, trained_lib_dir, monkeypatch, capsys
    ):
        monkeypatch.setenv("TASKALG_LIB", str(trained_lib_dir))
        rc = cli.main(
            ["run", "--env", str(env_file), "--task", "!A & C",
             "--semantics", "prioritized-safety", "--start", "0,0"]
        )
        assert rc == 0
        assert "class: PrioritizedSafety" in capsys.readouterr().out

    def test_assumption_warning_on_stderr(self, env_file, trained_lib_dir, tmp_path, capsys):
        rc = cli.main(
            ["compose", "--env", str(env_file), "--task", "!A & !B",
             "--semantics", "prioritized-safety", "--lib", str(trained_lib_dir),
             "--out", str(tmp_path / "w.qtab")]
        )
        assert rc == 0
        assert "chatter" in capsys.readouterr().err

    def test_chattering_run_exits_5(self, tmp_path, capsys):
        world = split_route_world()
        env = tmp_path / "split.yaml"
        save_env(world, env)
        lib = tmp_path / "lib"
        lib.mkdir()
        for key in ("C", "not-A", "not-B"):
            assert cli.main(["train", "--env", str(env), "--task", key, "--lib", str(lib)]) == 0
        report = tmp_path / "chatter.yaml"
        rc = cli.main(
            ["run", "--env", str(env), "--task", "!A & !B & C",
             "--semantics", "prioritized-safety", "--lib", str(lib),
             "--start", f"{STAR[0]},{STAR[1]}", "--out", str(report)]
        )
        assert rc == 5
        assert report.exists()  # the report is still written
        out = capsys.readouterr().out
        assert "NonTerminating" in out and "chatter" in out

    def test_run_transcripts_match_for_formula_and_saved_table(
        self, env_file, trained_lib_dir, tmp_path, capsys
    ):
        args = ["--env", str(env_file), "--semantics", "min-violation",
                "--lib", str(trained_lib_dir), "--start", "0,0"]
        out_table = tmp_path / "t.qtab"
        cli.main(["compose", "--env", str(env_file), "--task", "(A | B) & C",
                  "--semantics", "min-violation", "--lib", str(trained_lib_dir),
                  "--out", str(out_table)])
        capsys.readouterr()
        assert cli.main(["run", "--task", "(A | B) & C", *args]) == 0
        via_formula = capsys.readouterr().out
        assert cli.main(["run", "--task", str(out_table), *args]) == 0
        via_table = capsys.readouterr().out
        assert via_formula == via_table

    def test_oracle_command(self, env_file, capsys):
        rc = cli.main(
            ["oracle", "--env", str(env_file), "--task", "!A & C",
             "--semantics", "prioritized-safety", "--start", "0,0"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "feasible: yes" in out and "{B} {C}" in out

    def test_render_policy_text(self, env_file, trained_lib_dir, capsys):
        rc = cli.main(
            ["render", "--env", str(env_file),
             "--table", str(trained_lib_dir / "C.qtab")]
        )
        assert rc == 0
        out = capsys.readouterr().out
        rows = [r for r in out.strip().splitlines()]
        assert len(rows) == 4 and all(len(r.split(" ")) == 5 for r in rows)
        assert "●" in out  # at least one stay glyph

    def test_render_svg(self, env_file, trained_lib_dir, tmp_path):
        out = tmp_path / "p.svg"
        rc = cli.main(
            ["render", "--env", str(env_file),
             "--table", str(trained_lib_dir / "C.qtab"),
             "--format", "svg", "--out", str(out)]
        )
        assert rc == 0
        text = out.read_text()
        assert text.startswith("<svg") and "marker" in text

    def test_render_report_marks_visit_order(self, env_file, trained_lib_dir, tmp_path, capsys):
        report = tmp_path / "r.yaml"
        cli.main(["run", "--env", str(env_file), "--task", str(trained_lib_dir / "C.qtab"),
                  "--start", "0,0", "--out", str(report)])
        capsys.readouterr()
        rc = cli.main(["render", "--env", str(env_file), "--report", str(report)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "0" in out and "1" in out and "visit order" in out

    def test_parse_error_exits_2(self, env_file):
        assert cli.main(["oracle", "--env", str(env_file), "--task", "A &&", "--start", "0,0"]) == 2
