import pytest

from portanet.config import (find_config, load_net, load_solver, parse_net, parse_sections,
                             parse_solver, shipped_config)
from portanet.errors import ConfigError

NET = """
# comment
[net]
name = tiny
[layer]
name = in
type = data
top = data, label   # trailing comment
channels = 1
height = 4
width = 4
[layer]
name = ip
type = inner_product
bottom = data
top = ip
num_output = 3
"""


def test_parse_net():
    spec = parse_net(NET)
    assert spec.name == "tiny"
    assert [l.name for l in spec.layers] == ["in", "ip"]
    assert spec.layers[0].tops == ("data", "label")
    assert spec.layers[1].options == {"num_output": "3"}


@pytest.mark.parametrize("text", [
    "name = x",
    "[layer]\nname = a\n",
    "[layer]\ntype = relu\n",
    "[layer]\nname = a\ntype = relu\nname = b\n",
    "[layer]\nname a\n",
    "[solver]\nbase_lr = 1\n",
    "[net]\ncolour = red\n[layer]\nname = a\ntype = relu\n",
    "",
])
def test_bad_net_files(text):
    with pytest.raises(ConfigError):
        parse_net(text)


def test_sections_keep_order():
    assert parse_sections("[a]\nx = 1\n[b]\n[a]\ny = 2") == [("a", {"x": "1"}), ("b", {}), ("a", {"y": "2"})]


def test_parse_solver():
    s = parse_solver("[solver]\nbase_lr = 0.01\nlr_policy = inv\ngamma = 1e-4\npower = 0.75\n"
                     "momentum = 0.9\nmax_iter = 10\n")
    assert s.learning_rate(0) == 0.01
    assert s.learning_rate(100) == pytest.approx(0.01 * (1 + 1e-4 * 100) ** -0.75)
    assert s.max_iter == 10


@pytest.mark.parametrize("text", [
    "[solver]\nbase_lr = 0\n",
    "[solver]\nlr_policy = step\n",
    "[solver]\nmomentum = 1.0\n",
    "[solver]\nmax_iter = -1\n",
    "[solver]\nlr_mult = 2\n",
    "[solver]\nbase_lr = fast\n",
    "[solver]\n[solver]\n",
])
def test_bad_solver_files(text):
    with pytest.raises(ConfigError):
        parse_solver(text)


def test_shipped_configs_load():
    for name in ("mnist_lenet.cfg", "cifar10_quick.cfg"):
        assert load_net(shipped_config(name)).layers
    mnist = load_solver(find_config("mnist_solver.cfg"))
    assert (mnist.lr_policy, mnist.base_lr, mnist.momentum) == ("inv", 0.01, 0.9)
    cifar = load_solver(find_config("cifar10_solver.cfg"))
    assert cifar.lr_policy == "fixed"
    with pytest.raises(ConfigError):
        shipped_config("nope.cfg")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_net(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError):
        load_solver(tmp_path / "missing.cfg")
