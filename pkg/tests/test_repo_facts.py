import re
from pathlib import Path

from src import cli, grape, metrics, protocol
from src.reports import CSV_COLUMNS

ROOT = Path(__file__).resolve().parents[1]


def _read_repo_facts_block(readme_path: Path) -> list[str]:
    content = readme_path.read_text()
    start_marker = "<!-- REPO_FACTS_START -->"
    end_marker = "<!-- REPO_FACTS_END -->"
    if start_marker not in content or end_marker not in content:
        raise AssertionError("Repo Facts block markers not found")

    block = content.split(start_marker, 1)[1].split(end_marker, 1)[0]
    return [line.strip() for line in block.strip().splitlines() if line.strip()]


def _extract_backtick_tokens(line: str) -> list[str]:
    return re.findall(r"`([^`]+)`", line)


def _facts() -> dict[str, list[str]]:
    out = {}
    for line in _read_repo_facts_block(ROOT / "README.md"):
        label = re.match(r"- \*\*(.+?)\*\*", line).group(1)
        out[label] = _extract_backtick_tokens(line)
    return out


def _subcommands() -> dict:
    parser = cli.build_parser()
    action = next(a for a in parser._actions if a.dest == "command")
    return action.choices


def test_repo_facts_commands_match_parser():
    assert _facts()["Commands"] == list(_subcommands())


def test_repo_facts_modes_and_targets_match_code():
    facts = _facts()
    assert facts["Sweep modes"] == [m.value for m in protocol.SweepMode]
    assert facts["Noise modes"] == [m.value for m in protocol.NoiseMode]
    assert facts["GRAPE targets"] == list(grape.BUILTIN_TARGETS)
    assert tuple(facts["CSV columns"]) == CSV_COLUMNS


def test_repo_facts_exit_codes_match_cli():
    assert _facts()["Exit codes"] == [str(cli.EXIT_OK), str(cli.EXIT_INVALID), str(cli.EXIT_NOT_CONVERGED)]


def test_repo_facts_metrics_match_registry():
    metrics.configure_metrics()
    text = metrics.render_metrics().decode()
    declared = {n for n in re.findall(r"^# TYPE (\S+)", text, flags=re.MULTILINE) if not n.endswith("_created")}
    assert set(_facts()["Metrics"]) == declared


def test_repo_facts_flags_are_documented_and_used():
    facts = _facts()
    flags = [f for key, tokens in facts.items() if key.endswith("flags") for f in tokens]
    reference = (ROOT / "docs" / "CONFIGURATION_REFERENCE.md").read_text()
    sources = "".join(p.read_text() for p in (ROOT / "src").glob("*.py"))
    for flag in flags:
        assert f"| {flag} |" in reference, flag
        assert f'"{flag}"' in sources, flag
