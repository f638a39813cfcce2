import time
from dataclasses import dataclass, field

import pytest

from decctl.codec.ledger import DEFAULT_PROFILE
from decctl.codec.training import TrainingSamples, collect_training_samples
from decctl.fitting import FitReport, fit_model_params
from decctl.core_types import ModelParams
from decctl.pipeline import ClipSpec, PreparedClip, prepare_clip

TRAIN_SEEDS = (101, 102)
TEST_SEEDS = (1, 2, 3)
TRAIN_FRAMES = 17
TEST_FRAMES = 41


@dataclass
class Training:
    samples: TrainingSamples
    params: ModelParams
    report: FitReport
    seconds: float


@dataclass
class TestClips:
    clips: list[PreparedClip]
    seconds: float
    runs: dict = field(default_factory=dict)  # (seed, target) -> RunResult
    run_seconds: float = 0.0


@pytest.fixture(scope="session")
def training() -> Training:
    t0 = time.perf_counter()
    samples = TrainingSamples()
    for i, seed in enumerate(TRAIN_SEEDS):
        prep = prepare_clip(ClipSpec(seed=seed, frames=TRAIN_FRAMES))
        samples.extend(collect_training_samples(prep.seq, prep.saliency, profile=DEFAULT_PROFILE,
                                                seed=i, name=prep.spec.label,
                                                reference=prep.reference))
    params, report = fit_model_params(samples.df, samples.mc, samples.mse)
    return Training(samples, params, report, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def test_clips() -> TestClips:
    t0 = time.perf_counter()
    clips = [prepare_clip(ClipSpec(seed=s, frames=TEST_FRAMES)) for s in TEST_SEEDS]
    return TestClips(clips, time.perf_counter() - t0)


# One summary line per acceptance criterion.

_RESULTS: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        name = report.nodeid.split("::")[-1]
        _RESULTS[name] = ("PASS" if report.outcome == "passed" else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_RESULTS):
        status, detail = _RESULTS[name]
        tr.write_line(f"{status}  {name}  {detail}")
