"""Bundled network fixtures with seeded pseudo-random weights."""

from importlib import resources
from pathlib import Path

from ..netspec import NetworkSpec, fill_random_weights, parse_network

FIXTURES = ("vgg11_cifar", "resnet18_cifar", "vgg16_imagenet", "vgg19_imagenet")


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    return Path(resources.files(__package__) / f"{name}.yaml")


def load_fixture(name: str, seed: int | None = 0) -> NetworkSpec:
    path = fixture_path(name)
    net = parse_network(path.read_text(), base_dir=path.parent)
    if seed is not None:
        fill_random_weights(net, seed)
    return net
