import csv
import io
import json

import numpy as np
import pytest

from lana.battery import check_config_game
from lana.cli import main
from lana.config import ConfigError, RunConfig, parse_config
from lana.game import PreferenceGame, random_game, RngStream, validate_game
from lana.harness import CSV_COLUMNS, EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, run_command


def test_minimal_document_gets_defaults():
    cfg = parse_config({})
    assert cfg == RunConfig()
    assert cfg.step_schedule(7) == 0.1
    assert cfg.seeds == [0] and cfg.floor == 1e-9


def test_round_trip_is_idempotent():
    cfg = parse_config({"generator": {"n": 6, "kind": "uniform"}, "gamma": 0.25, "seeds": [3, 4], "judge": "expert"})
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"gamma": 0}, "gamma"),
        ({"gamma": 1.5}, "gamma"),
        ({"noise_epsilon": 0.5}, "noise_epsilon"),
        ({"generator": {"n": 1}}, "generator.n"),
        ({"T": -1}, "T"),
        ({"update_mode": "adam"}, "update_mode"),
        ({"bogus": 1}, "bogus"),
        ({"generator": {"size": 3}}, "generator.size"),
    ],
)
def test_invalid_documents_name_the_field(doc, field):
    with pytest.raises(ConfigError) as info:
        parse_config(doc)
    assert info.value.field == field


def _cfg(tmp_path, **kw):
    doc = {"generator": {"n": 4, "kind": "cyclic"}, "T": 50, "output_dir": str(tmp_path / "out")}
    doc.update(kw)
    return parse_config(doc)


def test_csv_layout(tmp_path):
    code, _ = run_command(_cfg(tmp_path))
    assert code == EXIT_OK
    text = (tmp_path / "out" / "seed_0.csv").read_text()
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    # two players x (T + 1) records x one context
    assert len(rows) == 1 + 2 * 51
    t0 = [r for r in rows[1:] if r[0] == "0"]
    assert {r[1] for r in t0} == {"1", "2"}
    assert all(r[4] == "nan" for r in t0)


def test_summary_json(tmp_path):
    run_command(_cfg(tmp_path))
    s = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert set(s) == {"config", "game", "nash", "seeds"}
    seed = s["seeds"]["0"]
    assert seed["status"] == "ok"
    assert seed["summary"]["horizon_bound"]["holds"]
    assert (tmp_path / "out" / "seed_0.svg").read_text().startswith("<svg")


def test_reruns_are_byte_identical(tmp_path):
    a = _cfg(tmp_path / "a", judge="ground_truth_sampled", noise_epsilon=0.2)
    b = _cfg(tmp_path / "b", judge="ground_truth_sampled", noise_epsilon=0.2)
    run_command(a)
    run_command(b)
    for name in ("seed_0.csv", "summary.json", "seed_0.svg"):
        left = (tmp_path / "a" / "out" / name).read_bytes()
        right = (tmp_path / "b" / "out" / name).read_bytes()
        if name == "summary.json":
            left = left.replace(str(tmp_path / "a").encode(), b"")
            right = right.replace(str(tmp_path / "b").encode(), b"")
        assert left == right


def test_seeds_differ(tmp_path):
    run_command(_cfg(tmp_path, seeds=[0, 1], judge="ground_truth_sampled"))
    a = (tmp_path / "out" / "seed_0.csv").read_text()
    b = (tmp_path / "out" / "seed_1.csv").read_text()
    assert a != b


def test_compare_modes(tmp_path):
    code, comparison = run_command(_cfg(tmp_path, update_mode="sgd_loss_corrected", compare_modes=["sgd_loss_paper", "sgd_loss_corrected"], T=200, lr=0.5))
    assert code == EXIT_OK
    out = tmp_path / "out"
    assert (out / "sgd_loss_paper" / "seed_0.csv").exists()
    assert (out / "sgd_loss_corrected" / "seed_0.csv").exists()
    on_disk = json.loads((out / "comparison.json").read_text())
    assert on_disk["modes"] == ["sgd_loss_paper", "sgd_loss_corrected"]
    assert set(on_disk["results"]) == {"sgd_loss_paper", "sgd_loss_corrected"}


def _bad_game_file(tmp_path):
    g = random_game(RngStream(0), 3, "uniform")
    doc = g.to_dict()
    doc["contexts"][0]["P"][0][1] = 0.9
    doc["contexts"][0]["P"][1][0] = 0.9
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    return path


def test_invalid_game_file_is_an_invariant_failure(tmp_path):
    path = _bad_game_file(tmp_path)
    # the loader accepts it; validation reports it
    assert [v.kind for v in validate_game(PreferenceGame.load(str(path)))] == ["complement"]
    code, summary = run_command(_cfg(tmp_path, game_file=str(path)))
    assert code == EXIT_INVARIANT and "complement" in summary["error"]
    assert not check_config_game(_cfg(tmp_path, game_file=str(path))).passed
    assert main(["run", "--game-file", str(path), "--output-dir", str(tmp_path / "o")]) == EXIT_INVARIANT


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--gamma", "0"]) == EXIT_CONFIG
    assert "gamma" in capsys.readouterr().err
    assert main(["run", "--no-such-key", "1"]) == EXIT_CONFIG
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["run", "--T", "20", "--generator.n", "3", "--output-dir", str(tmp_path / "o")]) == EXIT_OK


def test_cli_gen_and_solve(tmp_path):
    game = tmp_path / "g.json"
    assert main(["gen", "--generator", '{"n": 5, "kind": "cyclic", "seed": 2}', "--out", str(game)]) == EXIT_OK
    g = PreferenceGame.load(str(game))
    assert g[0].n == 5 and validate_game(g) == []
    sol = tmp_path / "s.json"
    assert main(["solve", "--game-file", str(game), "--out", str(sol)]) == EXIT_OK
    doc = json.loads(sol.read_text())
    pi = np.array(doc["contexts"][0]["pi_star"])
    assert abs(pi.sum() - 1) < 1e-12 and doc["contexts"][0]["exploitability"] <= 1e-6


def test_cli_config_file_with_override(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"T": 10, "generator": {"n": 3}, "output_dir": str(tmp_path / "o")}))
    assert main(["run", "--config", str(conf), "--seeds", "[5]"]) == EXIT_OK
    assert (tmp_path / "o" / "seed_5.csv").exists()
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["config"]["T"] == 10


def test_battery_report_is_repeatable():
    from lana import battery

    for fn in (battery.check_geometric_mixture, battery.check_gradients, battery.check_reproducibility):
        assert fn().line(timing=False) == fn().line(timing=False)


@pytest.mark.slow
def test_verify_with_injected_bad_game(tmp_path, capsys):
    path = _bad_game_file(tmp_path)
    assert main(["verify", "--game-file", str(path)]) == EXIT_INVARIANT
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("[")]
    assert lines[0].startswith("[FAIL] 0. configured game validates")
    assert all(l.startswith("[PASS]") for l in lines[1:])
    assert len(lines) == 10
