"""Tests for the ways safeir is launched.

Covers:
- the exit statuses cli.main hands back to the console-script wrapper
- argparse usage errors, which exit with status 2 before any command runs
- -v / -vv reaching the logging configuration
- ``python -m safeir`` delegating to cli.main with sys.argv
- both console scripts resolving to plain (non-async) callables, and the
  MCP wrapper driving server.main through asyncio.run
"""

import asyncio
import importlib
import importlib.metadata
import inspect
import logging
import runpy
import sys

import pytest

from safeir.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, EXIT_TIMEOUT, main
from safeir.constants import NOFREE_DB_ENV

SCRIPTS = {"safeir": "safeir.cli:main", "safeir-mcp": "safeir.server:run"}


@pytest.fixture(autouse=True)
def isolated_nofree_db(tmp_path, monkeypatch):
    monkeypatch.setenv(NOFREE_DB_ENV, str(tmp_path / "nofree.tsv"))


def _resolve(target: str):
    module, attr = target.split(":")
    return getattr(importlib.import_module(module), attr)


# ============================================================================
# safeir
# ============================================================================

class TestExitStatus:

    @pytest.mark.parametrize("argv,status", [
        (["parse", "fixture:loop_cast"], EXIT_OK),
        (["run", "fixture:loop_cast", "--mode", "none"], EXIT_OK),
        (["run", "fixture:dangling_cast"], EXIT_FAILED),
        (["run", "fixture:stack_return", "--mode", "baseline"], EXIT_FAILED),
        (["run", "fixture:loop_cast", "--mode", "baseline", "--max-steps", "10"], EXIT_TIMEOUT),
        (["print", "fixture:missing"], EXIT_ERROR),
        (["run", "fixture:loop_cast", "--entry", "nope"], EXIT_ERROR),
    ])
    def test_status(self, argv, status, capsys):
        assert main(argv) == status

    def test_statuses_are_distinct(self):
        assert len({EXIT_OK, EXIT_FAILED, EXIT_ERROR, EXIT_TIMEOUT}) == 4

    @pytest.mark.parametrize("argv", [
        [],
        ["run"],
        ["instrument", "fixture:loop_cast", "--mode", "warp"],
        ["nofree-db"],
        ["history", "x.db", "--run", "one"],
    ])
    def test_usage_errors_exit_with_error_status(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == EXIT_ERROR
        assert "usage: safeir" in capsys.readouterr().err

    @pytest.mark.parametrize("flags,level", [
        ([], logging.WARNING),
        (["-v"], logging.INFO),
        (["-vv"], logging.DEBUG),
        (["-v", "-v", "-v"], logging.DEBUG),
    ])
    def test_verbosity(self, flags, level, monkeypatch, capsys):
        seen = []
        monkeypatch.setattr(logging, "basicConfig", lambda **kwargs: seen.append(kwargs["level"]))
        assert main([*flags, "parse", "fixture:loop_cast"]) == EXIT_OK
        assert seen == [level]


class TestModuleExecution:

    def test_python_dash_m(self, monkeypatch, capsys):
        monkeypatch.setattr(sys, "argv", ["safeir", "parse", "fixture:stack_return"])
        monkeypatch.delitem(sys.modules, "safeir.__main__", raising=False)
        with pytest.raises(SystemExit) as exc:
            runpy.run_module("safeir", run_name="__main__")
        assert exc.value.code == EXIT_OK
        assert capsys.readouterr().out.startswith("stack_return: ")

    def test_main_reads_sys_argv(self, monkeypatch, capsys):
        monkeypatch.setattr(sys, "argv", ["safeir", "run", "fixture:dangling_cast"])
        assert main() == EXIT_FAILED


# ============================================================================
# Console scripts
# ============================================================================

class TestConsoleScripts:

    @pytest.mark.parametrize("target", sorted(SCRIPTS.values()))
    def test_targets_are_sync(self, target):
        func = _resolve(target)
        assert callable(func)
        assert not inspect.iscoroutinefunction(func), f"{target} would return a coroutine"

    def test_server_main_stays_async(self):
        assert inspect.iscoroutinefunction(_resolve("safeir.server:main"))

    def test_mcp_wrapper_drives_server_main(self, monkeypatch):
        handed = []

        def fake_asyncio_run(coro):
            handed.append(coro.cr_code.co_name)
            coro.close()

        monkeypatch.setattr(asyncio, "run", fake_asyncio_run)
        assert _resolve(SCRIPTS["safeir-mcp"])() is None
        assert handed == ["main"]

    @pytest.mark.parametrize("name", sorted(SCRIPTS))
    def test_installed_metadata(self, name):
        scripts = {ep.name: ep.value
                   for ep in importlib.metadata.entry_points(group="console_scripts")}
        if name not in scripts:
            pytest.skip(f"{name} is not installed")
        assert scripts[name] == SCRIPTS[name]
