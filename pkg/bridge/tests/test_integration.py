"""Echo-mode acceptance: the bridge is transparent to the client pipeline.

The client package is exercised only through its command-line interface,
in a subprocess — the bridge never imports it.
"""

import re
import subprocess
import sys
import time
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parents[2]
PANORAMA = REPO / "assets" / "panoramas" / "discs-a.png"


def run_client(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "omnisr.cli", *map(str, args)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def echo_server():
    proc = subprocess.Popen(
        [sys.executable, "-u", "-m", "osrd_bridge.cli", "--no-model", "--endpoint", "127.0.0.1:0"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    line = proc.stdout.readline()
    match = re.match(r"listening on (\S+)", line)
    assert match, f"unexpected server banner: {line!r}"
    yield match.group(1)
    proc.terminate()
    proc.wait(timeout=10)


@pytest.fixture(scope="module")
def lr_image(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("lr")
    mid, lr = tmp / "mid.png", tmp / "lr.png"
    run_client("degrade", PANORAMA, mid, "--scale", 4)
    run_client("degrade", mid, lr, "--scale", 4)
    return lr


def test_echo_mode_bit_identical_to_identity(echo_server, lr_image, tmp_path):
    common = (
        "--scale", 2, "--steps", 2, "--preup", "2,2",
        "--tp-resolution", 32, "--seed", 1,
    )
    local, remote = tmp_path / "local.png", tmp_path / "remote.png"
    run_client("sr", lr_image, local, "--denoiser", "identity", *common)
    start = time.perf_counter()
    run_client(
        "sr", lr_image, remote,
        "--denoiser", "external", "--endpoint", echo_server, *common,
    )
    elapsed = time.perf_counter() - start
    identical = local.read_bytes() == remote.read_bytes()
    print(
        f"[{'PASS' if identical else 'FAIL'}] bridge-echo-transparency: "
        f"{local.stat().st_size}-byte outputs identical={identical} ({elapsed:.1f}s)"
    )
    assert identical


def test_server_survives_multiple_sequential_runs(echo_server, lr_image, tmp_path):
    for i in range(2):
        out = tmp_path / f"out{i}.png"
        run_client(
            "sr", lr_image, out,
            "--denoiser", "external", "--endpoint", echo_server,
            "--scale", 2, "--steps", 1, "--preup", "1,1", "--tp-resolution", 32,
        )
        assert out.exists()
