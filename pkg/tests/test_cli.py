import csv
import io
import json

import pytest

from voxelparkour import cli
from voxelparkour.config import (
    DEFAULT_TOML,
    ConfigError,
    RunConfig,
    apply_overrides,
    from_dict,
    load_config,
)
from voxelparkour.policy import Genome, glorot_init, save_genome
from voxelparkour.world import loads_course

import tomli


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def zero_genome(tmp_path):
    return save_genome(Genome.zeros(), tmp_path / "zero.json")


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        "[ga]\npopulation_size = 8\nelite_count = 2\ntrials_per_genome = 1\nmax_generations = 4\nrng_seed = 3\n"
        "[run]\ncourse = \"two-gap\"\nwrite_figures = false\n"
    )
    return path


class TestConfig:
    def test_default_toml_matches_defaults(self):
        assert from_dict(tomli.loads(DEFAULT_TOML)) == RunConfig()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="config file not found"):
            load_config(tmp_path / "nope.toml")

    @pytest.mark.parametrize(
        "doc,where",
        [
            ({"ga": {"population_size": "big"}}, "ga.population_size"),
            ({"ga": {"bogus": 1}}, "ga.bogus"),
            ({"physics": {"gravity": True}}, "physics.gravity"),
            ({"nosuch": {}}, "nosuch"),
            ({"ga": {"elite_count": 500}}, "elite_count"),
            ({"schema_version": 9}, "schema_version"),
        ],
    )
    def test_errors_name_the_field(self, doc, where):
        with pytest.raises(ConfigError, match=where):
            from_dict(doc)

    def test_overrides_take_precedence(self, small_config):
        cfg = apply_overrides(load_config(small_config), {"ga": {"rng_seed": 9, "population_size": None}})
        assert cfg.ga.rng_seed == 9 and cfg.ga.population_size == 8
        assert cfg.mode == "fixed"

    def test_round_trip_through_json(self):
        cfg = RunConfig()
        assert from_dict(json.loads(cfg.dumps())) == cfg

    def test_episode_sensors_follow_physics(self):
        cfg = from_dict({"physics": {"sprint_speed": 0.3}, "episode": {"timeout_ticks": 200}})
        s = cfg.sensors_for_episode()
        assert s.velocity_scale == 0.3 and s.episode_timeout_ticks == 200

    def test_nested_jitter_table(self):
        cfg = from_dict({"episode": {"jitter": {"delay": 2, "probability": 0.5}}})
        assert cfg.episode.jitter.stochastic


class TestTrain:
    def test_byte_identical_reruns(self, tmp_path, capsys, small_config):
        outputs = []
        for name in ("a", "b"):
            code, out, _ = run(capsys, "train", "--config", small_config, "--output-dir", tmp_path / name)
            assert code == 0
            summary = json.loads(out)
            outputs.append(summary)
        assert outputs[0] == outputs[1]
        # config.json differs only by output_dir
        for f in ("telemetry.jsonl", outputs[0]["genome"], "summary.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_outputs(self, tmp_path, capsys, small_config):
        out_dir = tmp_path / "run"
        code, out, _ = run(capsys, "train", "--config", small_config, "--output-dir", out_dir,
                           "--max-generations", 3)
        assert code == 0
        summary = json.loads(out)
        lines = (out_dir / "telemetry.jsonl").read_text().splitlines()
        assert len(lines) == summary["generations"] == 3
        rec = json.loads(lines[0])
        for key in ("generation", "best_fitness", "mean_fitness", "best_genome_id", "current_mutation_rate",
                    "current_mutation_sigma", "plateau_counter", "course_id", "cumulative_deaths"):
            assert key in rec
        assert summary["genome"] == f"best_{summary['course_id']}_gen{summary['best_generation']}.json"
        assert (out_dir / summary["genome"]).is_file()
        assert not (out_dir / "fitness.png").exists()

    def test_figures_written(self, tmp_path, capsys):
        out_dir = tmp_path / "figs"
        code, _, _ = run(capsys, "train", "--course", "gapless", "--population", 4, "--elite", 1,
                         "--trials", 1, "--max-generations", 2, "--output-dir", out_dir)
        assert code == 0
        for name in ("fitness.png", "mutation.png"):
            assert (out_dir / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_cdr_mode(self, tmp_path, capsys):
        code, out, _ = run(capsys, "train", "--population", 4, "--elite", 1, "--trials", 1,
                           "--max-generations", 2, "--death-threshold", 1, "--no-figures",
                           "--output-dir", tmp_path / "cdr")
        assert code == 0
        assert json.loads(out)["mode"] == "cdr"

    def test_missing_config_exits_1(self, tmp_path, capsys):
        missing = tmp_path / "absent.toml"
        code, _, err = run(capsys, "train", "--config", missing)
        assert code == 1
        assert str(missing) in err

    def test_unknown_course_exits_1(self, tmp_path, capsys):
        code, _, err = run(capsys, "train", "--course", "no-such-course", "--output-dir", tmp_path)
        assert code == 1 and "no-such-course" in err


class TestEval:
    def test_zero_genome_on_gapless(self, capsys, zero_genome):
        code, out, _ = run(capsys, "eval", zero_genome, "--course", "gapless")
        assert code == 0
        doc = json.loads(out)
        assert doc["reached_goal"] is True and doc["fitness"] >= 500
        assert doc["termination"] == "goal" and doc["success_rate"] == 1.0

    def test_corrupt_genome(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        code, _, err = run(capsys, "eval", bad, "--course", "gapless")
        assert code == 1 and "bad.json" in err

    def test_needs_a_course(self, capsys, zero_genome):
        code, _, err = run(capsys, "eval", zero_genome)
        assert code == 1 and "--course" in err

    def test_generated_course(self, capsys, zero_genome):
        code, out, _ = run(capsys, "eval", zero_genome, "--course-seed", 5)
        assert code == 0 and json.loads(out)["course_id"].startswith("cdr-")

    def test_jitter_flags(self, capsys, tmp_path):
        g = save_genome(glorot_init(3), tmp_path / "g.json")
        code, out, _ = run(capsys, "eval", g, "--course", "two-gap", "--jitter", 2,
                           "--jitter-probability", 0.5, "--trials", 4)
        assert code == 0
        doc = json.loads(out)
        assert doc["jitter"] == {"delay": 2, "probability": 0.5} and doc["trials"] == 4


class TestReplay:
    def test_trace(self, tmp_path, capsys, zero_genome):
        traces = []
        for name in ("a.jsonl", "b.jsonl"):
            code, out, _ = run(capsys, "replay", zero_genome, "--course", "gapless",
                               "--trace-out", tmp_path / name)
            assert code == 0
            traces.append((tmp_path / name).read_bytes())
        summary = json.loads(out)
        assert traces[0] == traces[1]
        assert len(traces[0].decode().splitlines()) == summary["final_tick"] + 1

    def test_figure(self, tmp_path, capsys, zero_genome):
        code, _, _ = run(capsys, "replay", zero_genome, "--course", "two-gap",
                         "--trace-out", tmp_path / "t.jsonl", "--figure", tmp_path / "t.png")
        assert code == 0 and (tmp_path / "t.png").stat().st_size > 0

    def test_unwritable_trace(self, tmp_path, capsys, zero_genome):
        code, _, _ = run(capsys, "replay", zero_genome, "--course", "gapless",
                         "--trace-out", tmp_path / "missing" / "t.jsonl")
        assert code == 1


class TestCourse:
    def test_deterministic_and_loadable(self, capsys):
        _, a, _ = run(capsys, "course", "--seed", 42)
        _, b, _ = run(capsys, "course", "--seed", 42)
        assert a == b
        course = loads_course(a)
        assert course.seed == 42 and course.dumps() == a

    def test_all_blocks(self, capsys):
        code, out, _ = run(capsys, "course", "--seed", 1, "--block-probability", 1.0, "--cell-count", 12)
        assert code == 0
        assert loads_course(out).cells == "SSS" + "B" * 8 + "G"

    def test_invalid_probability(self, capsys):
        code, _, err = run(capsys, "course", "--seed", 1, "--block-probability", 1.5)
        assert code == 1 and "block_probability" in err


class TestJitterBench:
    def test_csv(self, tmp_path, capsys):
        g = save_genome(glorot_init(2), tmp_path / "g.json")
        args = ["jitter-bench", g, "--course", "two-gap", "--delays", "3,0,1"]
        code, out, _ = run(capsys, *args)
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["delay_ticks", "mean_fitness", "success_rate"]
        assert [int(r[0]) for r in rows[1:]] == [0, 1, 3]
        _, again, _ = run(capsys, *args)
        assert again == out
        _, ev, _ = run(capsys, "eval", g, "--course", "two-gap")
        assert float(rows[1][1]) == json.loads(ev)["mean_fitness"]

    @pytest.mark.parametrize("delays", ["", ",", "a,b", "-1"])
    def test_bad_delays(self, capsys, zero_genome, delays):
        code, _, _ = run(capsys, "jitter-bench", zero_genome, "--course", "gapless", "--delays", delays)
        assert code != 0

    def test_plot(self, tmp_path, capsys, zero_genome):
        code, _, _ = run(capsys, "jitter-bench", zero_genome, "--course", "gapless", "--delays", "0,2",
                         "--plot", tmp_path / "j.png")
        assert code == 0 and (tmp_path / "j.png").is_file()


def test_default_config_command(capsys):
    code, out, _ = run(capsys, "default-config")
    assert code == 0 and out == DEFAULT_TOML
