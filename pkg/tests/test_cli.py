# Tests for the command-line interface

from click.testing import CliRunner

from src.homfilter.cli import cli


def test_version():
    """Test the version flag"""
    result = CliRunner().invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "homfilter" in result.output


def test_help_lists_commands():
    """Test the styled help panel"""
    result = CliRunner().invoke(cli, ["--help"])
    assert result.exit_code == 0
    for command in ("simulate", "average", "filter", "run", "selftest"):
        assert command in result.output


def test_unknown_kind_is_usage_error():
    """Test that an unknown experiment kind exits with 2"""
    result = CliRunner().invoke(cli, ["run", "bogus"])
    assert result.exit_code == 2


def test_missing_config_exits_with_2(tmp_path):
    """Test that configuration errors map to exit code 2"""
    result = CliRunner().invoke(
        cli, ["-c", str(tmp_path / "missing.toml"), "run", "strong-convergence"]
    )
    assert result.exit_code == 2


def test_coarse_epsilon_exits_with_2(small_config):
    """Test that the dt ≤ ε/10 guard is a configuration error"""
    result = CliRunner().invoke(
        cli, ["-c", str(small_config), "simulate", "-e", "0.001"]
    )
    assert result.exit_code == 2


def test_run_writes_report(small_config, tmp_path):
    """Test a small sweep end to end"""
    result = CliRunner().invoke(
        cli, ["-c", str(small_config), "-j", "2", "run", "strong-convergence"]
    )
    assert result.exit_code in (0, 1), result.output
    out = tmp_path / "out"
    for name in (
        "strong_convergence.csv",
        "strong_convergence_checks.csv",
        "strong_convergence_config.toml",
        "strong_convergence_provenance.toml",
    ):
        assert (out / name).exists()


def test_out_and_seed_overrides(small_config, tmp_path):
    """Test that -o and --seed take precedence over the file"""
    out = tmp_path / "elsewhere"
    result = CliRunner().invoke(
        cli,
        [
            "-c",
            str(small_config),
            "-o",
            str(out),
            "--seed",
            "3",
            "run",
            "strong-convergence",
        ],
    )
    assert result.exit_code in (0, 1), result.output
    echo = (out / "strong_convergence_config.toml").read_text(encoding="utf-8")
    assert "seed = 3" in echo


def test_simulate_writes_paths(small_config, tmp_path):
    """Test the path CSV of one replication"""
    result = CliRunner().invoke(
        cli, ["-c", str(small_config), "simulate", "-e", "0.05"]
    )
    assert result.exit_code == 0, result.output
    path = tmp_path / "out" / "paths_eps0.05_rep0.csv"
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,x1,z1,x1_hom"
    assert len(lines) == 252


def test_filter_with_fd_oracle_shares_initial_law(tmp_path):
    """Test that filter --fd starts both filters from N(x0, initial_std²)"""
    config_path = tmp_path / "levy.toml"
    config_path.write_text(
        "\n".join(
            [
                "[experiment]",
                'kind = "zakai-crosscheck"',
                "[model]",
                'name = "levy-correlated"',
                "[model.params]",
                "c1 = 0.0",
                "[observation]",
                'h = "tanh"',
                "h_scale = 0.5",
                'intensity = "tanh"',
                "jump_rate = 2.0",
                "jump_scale = 0.5",
                "[sweep]",
                "epsilons = [0.1]",
                "[grid]",
                "dt = 0.005",
                "horizon = 0.2",
                "[filter]",
                "particles = 5000",
                'function = "tanh"',
                "[zakai]",
                "cells = 200",
                "initial_std = 0.3",
                "[output]",
                f'dir = "{(tmp_path / "out").as_posix()}"',
            ]
        ),
        encoding="utf-8",
    )
    result = CliRunner().invoke(
        cli, ["-c", str(config_path), "filter", "--fd"]
    )
    assert result.exit_code == 0, result.output
    out = tmp_path / "out"
    particle = out / "filter_homogenized.csv"
    oracle = out / "filter_fd.csv"
    first = [
        float(p.read_text(encoding="utf-8").splitlines()[1].split(",")[2])
        for p in (particle, oracle)
    ]
    assert abs(first[0] - first[1]) < 0.02
