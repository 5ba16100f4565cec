import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest


class ScriptedRepo:
    """A git repository whose commits are made with fixed, increasing dates."""

    def __init__(self, path: Path):
        self.path = path
        self.clock = 1_700_000_000
        self.env = {k: v for k, v in os.environ.items() if not k.startswith("GIT_")}
        self.env.update(
            GIT_AUTHOR_NAME="T", GIT_AUTHOR_EMAIL="t@example.com",
            GIT_COMMITTER_NAME="T", GIT_COMMITTER_EMAIL="t@example.com",
            GIT_CONFIG_NOSYSTEM="1",
        )
        path.mkdir(parents=True, exist_ok=True)
        self.git("init", "-q")
        self.git("checkout", "-q", "-b", "main")

    def git(self, *args, env=None):
        proc = subprocess.run(
            ["git", "-c", "commit.gpgsign=false", *args], cwd=self.path,
            capture_output=True, text=True, env=env or self.env,
        )
        assert proc.returncode == 0, proc.stderr
        return proc.stdout

    def write(self, rel, text):
        p = self.path / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)

    def commit(self, message, files=None, when=None):
        for rel, text in (files or {}).items():
            self.write(rel, text)
        self.git("add", "-A")
        self.clock = when if when is not None else self.clock + 100
        stamp = f"@{self.clock} +0000"
        env = dict(self.env, GIT_AUTHOR_DATE=stamp, GIT_COMMITTER_DATE=stamp)
        self.git("commit", "-q", "--allow-empty", "-m", message, env=env)
        return self.git("rev-parse", "HEAD").strip()


@pytest.fixture
def scripted_repo(tmp_path):
    if shutil.which("git") is None:
        pytest.skip("git not installed")
    return ScriptedRepo(tmp_path / "repo")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
