"""Shared fixtures: repo paths, builtin scenes, the demo capsule, media trees."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from einstall.content_capsule import Capsule, open_capsule
from einstall.scene_model import SceneManifest, builtin_scene

REPO_ROOT = Path(__file__).resolve().parents[1]


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line(
        "markers", "criterion(name): acceptance criterion; prints a PASS/FAIL line per run"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item: pytest.Item, call: pytest.CallInfo):
    """One visible verdict line per acceptance criterion, capture-proof."""
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    ran = report.when == "call" or (report.when == "setup" and report.failed)
    if not ran:
        return
    verdict = "PASS" if report.passed else "FAIL"
    line = f"[PRIMARY] {marker.args[0]}: {verdict}"
    reporter = item.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_line(line)
    else:
        print(line)


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture()
def vf_manifest() -> SceneManifest:
    return builtin_scene("vf")


@pytest.fixture()
def mc_manifest() -> SceneManifest:
    return builtin_scene("mc")


@pytest.fixture(scope="session")
def demo_capsule_dir() -> Path:
    path = REPO_ROOT / "capsules" / "demo"
    if not (path / "index.json").is_file():
        pytest.fail("demo capsule missing; regenerate with scripts/make_demo_capsule.py")
    return path


@pytest.fixture(scope="session")
def demo_capsule(demo_capsule_dir: Path) -> Capsule:
    return open_capsule(demo_capsule_dir)


def write_sidecar(media_path: Path, kind: str, duration: float, fps: float | None = None) -> None:
    meta: dict = {"kind": kind, "duration": duration}
    if fps is not None:
        meta["fps"] = fps
    sidecar = media_path.with_name(media_path.name + ".meta.json")
    sidecar.write_text(json.dumps(meta), encoding="utf-8")


def build_media_tree(
    root: Path,
    cities: tuple[str, ...] = ("aachen", "boston"),
    slots: tuple[str, ...] = ("s1", "s2"),
    items_per_slot: int = 2,
) -> Path:
    """A minimal ingestible <city>/<slot>/<media> tree with sidecars."""
    for city in cities:
        for slot in slots:
            d = root / city / slot
            d.mkdir(parents=True, exist_ok=True)
            for i in range(items_per_slot):
                if i % 2 == 0:
                    media = d / f"clip_{i}.mp4"
                    media.write_text(f"stub video {city}/{slot}/{i}\n", encoding="utf-8")
                    write_sidecar(media, "video", duration=2.0 + i, fps=25.0)
                else:
                    media = d / f"still_{i}.png"
                    media.write_text(f"stub image {city}/{slot}/{i}\n", encoding="utf-8")
                    write_sidecar(media, "image", duration=3.0)
    return root


@pytest.fixture()
def media_tree(tmp_path: Path) -> Path:
    return build_media_tree(tmp_path / "tree")
