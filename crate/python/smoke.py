"""Smoke test for the hosch_py extension.

Builds the extension with cargo (unless it is already importable), loads it
and exercises states, evolution, diagnostics, the Floquet chart and the CLI
entry point.

    python3 python/smoke.py
"""

import importlib.util
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import hosch_py

        return hosch_py
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "hosch-py"],
        cwd=ROOT,
        check=True,
        env={**os.environ, "PYO3_BUILD_EXTENSION_MODULE": "1"},
    )
    lib = ROOT / "target" / "release" / "libhosch_py.so"
    dest = pathlib.Path(tempfile.mkdtemp()) / "hosch_py.so"
    shutil.copy(lib, dest)
    spec = importlib.util.spec_from_file_location("hosch_py", dest)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def check(label, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {label} {detail}")
    if not ok:
        sys.exit(1)


def main():
    h = load()

    g = h.Grid(128, 40.0)
    packet = h.make_state(g, "gaussian_packet", t=0.0, t0=2.0)
    me = h.Model.me(0.1, 0.05, 0.02)
    check("packet norm", abs(packet.norm() - 1.0) < 1e-12)
    r = h.nonlinear_residual(packet, me)
    check("packets are unmodified", r < 1e-10, f"{r:.2e}")

    wide = h.Grid(64, 64.0)
    psi = h.make_state(wide, "perturbed_gaussian", sigma=3.0, seed=1, amplitude=0.2, cutoff=6)
    end, obs = h.evolve(psi, me, 0.01, 0.5, sample_stride=10)
    drift = max(abs(o["norm"] - obs[0]["norm"]) for o in obs)
    check("norm conserved", drift < 1e-10, f"{drift:.2e}")

    flat = h.make_state(h.Grid(64, 6.283185307179586), "random", seed=3, cutoff=3, amplitude=0.4, background=1.5)
    dev = h.homogeneity_check(flat, h.Model.preset("ext"), 3.0 + 4.0j)
    check("homogeneity", dev < 1e-10, f"{dev:.2e}")
    smooth = h.make_state(h.Grid(64, 6.283185307179586), "random", seed=3, cutoff=2, amplitude=0.4, background=1.5)
    gauge = h.gauge_form_residual(smooth, 0.2, 0.05, 0.0)
    check("gauge form (b6 = 0)", gauge["deviation"] < 1e-8, f"{gauge['deviation']:.2e}")

    chart = h.floquet_analyze(h.Hill.mathieu(0.0, 1.0), -1.0, 2.0, 60)
    a0 = chart["edges"][0]["spectral_parameter"]
    check("Mathieu a0(1)", abs(a0 + 0.4551386041) < 1e-9, f"{a0:.10f}")

    with tempfile.TemporaryDirectory() as out:
        code = h.run_cli("bands", str(ROOT / "configs" / "bands_mathieu.toml"), out)
        check("cli bands", code == 0 and (pathlib.Path(out) / "summary.json").exists())

    print("smoke test passed")


if __name__ == "__main__":
    main()
