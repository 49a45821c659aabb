"""End-to-end smoke of the python surface: build a network, partition it,
drive the simulator, train a tiny agent, and reload its checkpoint."""

import json

import pytest

import starlight as sl


def test_version():
    assert sl.version() == "0.1.0"


def test_network_and_partition():
    net = sl.make_grid(4, 4)
    assert len(net) == 16
    assert net.neighbors("2-2") == ["1-2", "2-1", "2-3", "3-2"]

    centers = sl.minimum_dominating_set(net)
    assert len(centers) == 4
    assert sl.is_dominating_set(net, centers)
    assert sl.order_invariant(net, centers)

    regions = sl.build_regions(net)
    assert [r["center"] for r in regions["regions"]] == centers
    members = [s for r in regions["regions"] for s, on in zip(r["slots"], r["mask"]) if on]
    assert sorted(members) == sorted(net.ids)


def test_network_roundtrip(tmp_path):
    path = str(tmp_path / "net.json")
    sl.make_cross(250.0, 2).save(path)
    net = sl.load_network(path)
    assert len(net) == 5
    assert net.degree("2-2") == 4


def test_simulator_step_and_determinism():
    net = sl.make_grid(1, 1, lanes=1)
    flow = {"generator": {"mean": 0.5, "std": 0.7}}

    def run(seed):
        sim = sl.Simulator(net, flow, {"episode_s": 100})
        sim.reset(seed)
        trace = []
        while not sim.done:
            trace.append(sim.step(["NS" if sim.clock_s % 20 < 10 else "EW"]))
        return trace, sim.metrics()

    a_trace, a_metrics = run(11)
    b_trace, b_metrics = run(11)
    assert a_trace == b_trace
    assert a_metrics == b_metrics
    assert len(a_trace) == 10
    assert len(sim_obs := sl.Simulator(net, flow).observe("1-1")) == 2 * 4 + 4
    assert sim_obs[-4:] == [1.0, 0.0, 0.0, 0.0]  # initial phase is NS


def test_phase_dict_rejects_missing_id():
    net = sl.make_grid(1, 2, lanes=1)
    sim = sl.Simulator(net, {"vehicles": []})
    with pytest.raises(sl.Error):
        sim.step({"1-1": "NS"})


TINY = {
    "network": {"grid": {"rows": 1, "cols": 1, "lanes": 1}},
    "flow": {"generator": {"mean": 0.4, "std": 0.5}},
    "sim": {"episode_s": 200},
    "agent": {
        "net": {"trunk": [16], "head_hidden": 8},
        "batch_size": 8,
        "warmup": 16,
        "replay_capacity": 4000,
        "epsilon": {"start": 1.0, "end": 0.05, "decay_steps": 60},
    },
    "episodes": 3,
    "eval_episodes": 2,
    "seed": 9,
}


def test_train_and_checkpoint(tmp_path):
    out = tmp_path / "run"
    history, final_eval = sl.train(TINY, str(out))
    assert len(history) == 3
    assert history[0]["loss"] is not None
    assert (out / "checkpoint.bin").exists()
    assert (out / "eval.json").exists()

    lines = (out / "metrics.jsonl").read_text().splitlines()
    assert [json.loads(l)["episode"] for l in lines] == [0, 1, 2]

    again = sl.evaluate_checkpoint(str(out / "checkpoint.bin"), TINY, episodes=2)
    assert again["mean"] == final_eval["mean"]


def test_evaluate_controller():
    result = sl.evaluate_controller(TINY, "fixed", episodes=2, seed=5)
    assert result["controller"] == "fixed"
    assert len(result["per_episode"]) == 2
    with pytest.raises(sl.Error):
        sl.evaluate_controller(TINY, "bogus")
