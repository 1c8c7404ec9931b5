"""Session fixtures for the acceptance suite.

The heavy pipeline (collection, three trained policies, closed-loop
reports) is built once per session and shared across acceptance criteria.
Elapsed wall-clock times are tracked so the training budget criterion can
assert against real costs.
"""

import time

import pytest

from fourway import bench, dataset as ds, policy, training
from fourway.controllers import ExpertController, LearnedController

COLLECT_SEED = 2024
TRAIN_SEED = 7
EVAL_SEED = 1234
EPISODES_PER_ROUTE_COLLECT = 12
EPISODES_PER_ROUTE_EVAL = 2
ACCEPT_EPOCHS = 12


class Timings(dict):
    def add(self, key: str, seconds: float) -> None:
        self[key] = self.get(key, 0.0) + seconds


@pytest.fixture(scope="session")
def timings():
    return Timings()


@pytest.fixture(scope="session")
def acceptance_dataset(timings):
    t0 = time.monotonic()
    data = ds.collect([0, 1, 3, 4], EPISODES_PER_ROUTE_COLLECT, 0.1,
                      COLLECT_SEED)
    timings.add("collect", time.monotonic() - t0)
    assert len(data.trajectories) >= 300, (
        f"collection produced only {len(data.trajectories)} trajectories")
    return data


def _train(dataset, preset_name, timings, key):
    cfg = policy.preset(preset_name, max_epochs=ACCEPT_EPOCHS)
    t0 = time.monotonic()
    store, hist = training.train(dataset, cfg, TRAIN_SEED)
    timings.add(key, time.monotonic() - t0)
    return LearnedController(store, cfg), hist


@pytest.fixture(scope="session")
def adaptive_policy(acceptance_dataset, timings):
    return _train(acceptance_dataset, "multitask_adaptive", timings,
                  "train_adaptive")


@pytest.fixture(scope="session")
def fixed_policy(acceptance_dataset, timings):
    return _train(acceptance_dataset, "multitask_fixed", timings,
                  "train_fixed")


@pytest.fixture(scope="session")
def single_policy(acceptance_dataset, timings):
    return _train(acceptance_dataset, "single", timings, "train_single")


def _evaluate(controller, condition, tag, timings, key):
    t0 = time.monotonic()
    report = bench.evaluate(controller, condition, EPISODES_PER_ROUTE_EVAL,
                            EVAL_SEED, model_tag=tag)
    timings.add(key, time.monotonic() - t0)
    return report


@pytest.fixture(scope="session")
def report_adaptive_tt(adaptive_policy, timings):
    return _evaluate(adaptive_policy[0], "TT", "mt-adaptive", timings,
                     "eval_adaptive_TT")


@pytest.fixture(scope="session")
def report_single_tt(single_policy, timings):
    return _evaluate(single_policy[0], "TT", "single-branch", timings,
                     "eval_single_TT")


@pytest.fixture(scope="session")
def report_adaptive_test(adaptive_policy, timings):
    return _evaluate(adaptive_policy[0], "tt", "mt-adaptive", timings,
                     "eval_adaptive_tt")


@pytest.fixture(scope="session")
def report_fixed_test(fixed_policy, timings):
    return _evaluate(fixed_policy[0], "tt", "mt-fixed", timings,
                     "eval_fixed_tt")


@pytest.fixture(scope="session")
def report_single_test(single_policy, timings):
    return _evaluate(single_policy[0], "tt", "single-branch", timings,
                     "eval_single_tt")


@pytest.fixture(scope="session")
def expert_report(timings):
    t0 = time.monotonic()
    report = bench.evaluate(ExpertController(), "TT", 4, EVAL_SEED,
                            model_tag="expert")
    timings.add("eval_expert", time.monotonic() - t0)
    return report
