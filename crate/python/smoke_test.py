"""Smoke test for the pygossip extension module.

Build and install first:

    pip install --no-build-isolation ./crates/py
    python python/smoke_test.py
"""

import math

import pygossip as pg


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    exp = pg.Experiment.example1()
    net, sel, world = exp.network, exp.selection, exp.world
    assert net.n == 8
    assert net.in_neighbors(3) == [2]
    assert not net.is_strongly_connected()

    classes, transient = sel.recurrent_classes()
    assert classes == [[1, 2, 3, 4, 5]] and transient == [6, 7, 8]

    pi = sel.stationary_distribution()
    expected = [1 / 6, 1 / 3, 1 / 4, 1 / 6, 1 / 12, 0, 0, 0]
    assert all(close(a, b, 1e-10) for a, b in zip(pi, expected)), pi
    assert sel.residual(pi) <= 1e-10

    report = exp.check()
    assert report["identifiable"]
    assert report["identifiability"][0]["witnesses"] == {"2": [2], "3": [1]}

    assert close(pg.theoretical_rate(pi, world, "2"), 0.019630505942730576)
    assert close(pg.theoretical_rate(pi, world, 3), 0.0081212505654489684)
    assert close(pg.kl_divergence([0.5, 0.5], [0.25, 0.75]), 0.5 * math.log(2) + 0.5 * math.log(2 / 3))
    assert pg.kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf

    trace = pg.simulate(net, sel, world, horizon=2000, seed=7)
    trace.replay()
    assert max(trace.verify_walk_identity(a, t, s) for a in (1, 3, 8) for t in (0, 500, 2000) for s in ("2", "3")) <= 1e-8
    walk = trace.backward_walk(8, 5)
    assert walk[:3] == [8, 7, 1]
    assert len(trace.occupancy(2, 2000)) == 8
    print("agent 2 belief at t=2000:", [round(p, 6) for p in trace.belief(2000, 2)])

    traces = exp.simulate(replications=4)
    slopes = [tr.empirical_rate(2, "2", (1000, 5000)) for tr in traces]
    mean = -sum(slopes) / len(slopes)
    print(f"empirical rate for state 2 over 4 replications: {mean:.6f}")
    assert abs(mean - 0.0196305) / 0.0196305 < 0.25

    lone = pg.World(["a", "b"], "a", [[[0.25, 0.75], [0.25, 0.75]]])
    assert lone.identifiability() == {"identifiable": False, "witnesses": {"b": []}}

    try:
        pg.Network(2, [(1, 3)])
    except pg.GossipError as e:
        print("rejected bad edge:", e)
    else:
        raise AssertionError("edge to agent 3 accepted")

    assert pg.Experiment.from_json(exp.to_json()).to_json() == exp.to_json()
    print("smoke test passed")


if __name__ == "__main__":
    main()
