"""Smoke test for the nlch extension.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/nlch-*.whl
"""

import math
import tempfile

import nlch


def main():
    assert "simulate" in nlch.EXPERIMENTS and len(nlch.EXPERIMENTS) == 8

    mesh = nlch.Mesh(1)
    assert (mesh.n_bulk, mesh.n_surf) == (61, 24)
    wb, ws = mesh.weights()
    assert abs(sum(wb) - math.pi) < 0.1 and abs(sum(ws) - 2 * math.pi) < 0.1

    cfg = nlch.Config("simulate", "mesh_level = 1\nscheme = { dt = 1e-3, t_end = 0.05 }\nparams = { order_dts = [] }\n")
    assert cfg.mesh_level == 1 and cfg.dt == 1e-3
    again = nlch.Config("simulate", cfg.to_toml())
    assert again.to_toml() == cfg.to_toml()

    sim = nlch.Simulation(cfg)
    start = sim.diagnostics()
    rows = sim.step(50)
    assert len(rows) == 50
    assert abs(rows[-1]["mean"] - start["mean"]) < 1e-12
    energies = [start["energy"]] + [r["energy"] for r in rows]
    assert all(b <= a + 1e-10 for a, b in zip(energies, energies[1:]))
    bulk, surf = sim.phi()
    assert len(bulk) == 61 and len(surf) == 24 and max(map(abs, bulk)) < 1

    b = nlch.yosida_log(1.0, 2.0, 0.1, 0.9)
    assert 0 < b < 9

    try:
        nlch.Config("simulate", "no_such_key = 1\n")
    except ValueError as e:
        assert "no_such_key" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    with tempfile.TemporaryDirectory() as out:
        passed, text, metrics = nlch.run_experiment(nlch.Config("validate"), out)
        assert passed, text
        assert metrics["c_star"] > 0

    print("smoke test passed")


if __name__ == "__main__":
    main()
