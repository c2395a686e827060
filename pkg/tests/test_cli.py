import re

import numpy as np
import pytest

from portanet.cli import main
from portanet.config import load_net, shipped_config
from portanet.net import Net
from portanet.snapshot import snapshot_save

from test_net import TINY

KV = re.compile(r"^(\w+=\S+)( \w+=\S+)*$")


@pytest.fixture
def tiny_cfg(tmp_path):
    net = tmp_path / "tiny.cfg"
    net.write_text(TINY.format(weight=1.0).replace("classes = 3", "classes = 3\nsource = synthetic"))
    solver = tmp_path / "solver.cfg"
    solver.write_text("[solver]\nbase_lr = 0.05\nmomentum = 0.9\nmax_iter = 10\n"
                      "test_interval = 5\ntest_iter = 2\ndisplay = 1\n")
    return net, solver


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out.splitlines(), err


def test_missing_solver_is_usage_error(capsys, tiny_cfg):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--net", str(tiny_cfg[0])])
    assert exc.value.code != 0
    assert "--solver" in capsys.readouterr().err


def test_smoke_train(capsys, tmp_path, tiny_cfg):
    net, solver = tiny_cfg
    snap = tmp_path / "out" / "tiny.pnsn"
    code, out, err = run(capsys, "train", "--net", net, "--solver", solver, "--snapshot", snap)
    assert code == 0
    assert all(KV.match(line) for line in out)
    steps = [l for l in out if "train_loss=" in l]
    assert [int(l.split()[0][5:]) for l in steps] == list(range(1, 11))
    metrics = [l for l in out if " acc=" in l]
    assert [l.split()[0] for l in metrics] == ["iter=0", "iter=5", "iter=10"]
    assert out[-1] == f"snapshot={snap}"
    assert snap.exists()


def test_backends_print_identical_logs(capsys, tmp_path, tiny_cfg):
    net, solver = tiny_cfg
    logs = []
    for extra in ([], ["--backend", "threads", "--threads", "2"], ["--backend", "threads", "--threads", "8"]):
        code, out, _ = run(capsys, "train", "--net", net, "--solver", solver,
                           "--snapshot", tmp_path / "s.pnsn", *extra)
        assert code == 0
        logs.append(out)
    assert logs[0] == logs[1] == logs[2]


def test_test_matches_train_report(capsys, tmp_path, mnist_dir):
    snap = tmp_path / "m.pnsn"
    solver = tmp_path / "s.cfg"
    solver.write_text("[solver]\nbase_lr = 0.01\nmomentum = 0.9\nmax_iter = 3\n"
                      "test_interval = 3\ntest_iter = 2\n")
    code, out, _ = run(capsys, "train", "--net", "mnist_lenet.cfg", "--solver", solver,
                       "--data-dir", mnist_dir, "--snapshot", snap)
    assert code == 0
    last = dict(kv.split("=") for kv in out[-2].split())
    code, out, _ = run(capsys, "test", "--net", "mnist_lenet.cfg", "--snapshot", snap,
                       "--data-dir", mnist_dir, "--solver", solver)
    assert code == 0
    got = dict(kv.split("=") for kv in out[0].split())
    assert (got["accuracy"], got["loss"]) == (last["acc"], last["loss"])


def test_random_weights_are_at_chance(capsys, tmp_path, mnist_dir):
    net = Net(load_net(shipped_config("mnist_lenet.cfg")), batch=100, seed=7)
    snap = tmp_path / "random.pnsn"
    snapshot_save(net, snap)
    code, out, _ = run(capsys, "test", "--net", "mnist_lenet.cfg", "--snapshot", snap,
                       "--data-dir", mnist_dir)
    assert code == 0
    acc = float(out[0].split()[0].split("=")[1])
    assert abs(acc - 0.1) <= 0.05


def test_corrupt_snapshot_exits_nonzero(capsys, tmp_path, tiny_cfg):
    bad = tmp_path / "bad.pnsn"
    bad.write_bytes(b"PNSN\x01\x00")
    code, out, err = run(capsys, "test", "--net", tiny_cfg[0], "--snapshot", bad)
    assert code != 0 and out == []
    assert "error" in err


def test_missing_data_dir(capsys):
    code, out, err = run(capsys, "test", "--net", "mnist_lenet.cfg", "--snapshot", "x.pnsn")
    assert code != 0 and "--data-dir" in err


def parse_report(lines):
    layers = [dict(kv.split("=") for kv in l.split()) for l in lines if l.startswith("layer=")]
    total = dict(kv.split("=") for kv in lines[-1].split())
    return layers, total


def test_time_report(capsys, tiny_cfg):
    code, out, _ = run(capsys, "time", "--net", tiny_cfg[0], "--iterations", 3)
    assert code == 0
    layers, total = parse_report(out)
    assert [l["layer"] for l in layers] == ["data", "conv", "ip", "accuracy", "loss"]
    assert len(out) == len(layers) + 1
    fb = float(total["average_forward_backward_ms"])
    assert fb >= max(float(l["forward_ms"]) + float(l["backward_ms"]) for l in layers)
    assert fb == pytest.approx(float(total["average_forward_ms"]) + float(total["average_backward_ms"]),
                               abs=1e-3)
    assert total["iterations"] == "3" and total["backend"] == "seq"


def test_time_thread_count_from_env_and_flag(capsys, monkeypatch, tiny_cfg):
    monkeypatch.setenv("PORTANET_THREADS", "3")
    _, out, _ = run(capsys, "time", "--net", tiny_cfg[0], "--iterations", 1, "--backend", "threads")
    assert "threads=3" in out[-1]
    _, out, _ = run(capsys, "time", "--net", tiny_cfg[0], "--iterations", 1, "--backend", "threads",
                    "--threads", "2", "--batch", "4")
    assert "threads=2" in out[-1] and "batch=4" in out[-1]


def test_bad_thread_flag(capsys, tiny_cfg):
    with pytest.raises(SystemExit):
        main(["time", "--net", str(tiny_cfg[0]), "--threads", "0"])
