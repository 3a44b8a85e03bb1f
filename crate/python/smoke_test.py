#!/usr/bin/env python3
"""Smoke test for the ibonset_py extension module.

Build and run:

    cargo build -p ibonset-py --release
    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def import_module():
    so = ROOT / "target" / "release" / "libibonset_py.so"
    if not so.exists():
        sys.exit("build the extension first: cargo build -p ibonset-py --release")
    tmp = Path(tempfile.mkdtemp(prefix="ibonset_py_"))
    shutil.copy(so, tmp / "ibonset_py.so")
    sys.path.insert(0, str(tmp))
    import ibonset_py

    return ibonset_py


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    ib = import_module()

    # BSC delta = 0.25: beta_c = eta^-1 = (1 - 2 delta)^-2 = 4
    j = ib.bsc_joint(0.25)
    assert (j.nx, j.ny) == (2, 2)
    approx(j.mutual_information(), 1 - (-0.75 * math.log2(0.75) - 0.25 * math.log2(0.25)), 1e-12)

    onset = ib.solve_onset(j, tol=1e-9)
    approx(onset["beta_c"], 4.0, 1e-3)

    chi = ib.eta_chi2(j)
    approx(chi["eta_chi2"], 0.25, 1e-12)
    approx(chi["beta_c_hat"], 4.0, 1e-10)
    assert chi["eta_chi2"] <= onset["eta_kl"] + 1e-6

    brute = ib.eta_kl_bruteforce(j, resolution=40)
    approx(brute, 0.25, 1e-4)

    # IB solve above / below the onset
    cold = ib.solve_ib(j, 3.0, tol=1e-10)
    assert cold["i_zy_bits"] < 1e-6, "below beta_c the solution must be uninformative"
    hot = ib.solve_ib(j, 6.0, tol=1e-10)
    assert hot["i_zy_bits"] > 0.1
    assert len(hot["encoder"][0]) == j.nx
    for x in range(j.nx):
        approx(sum(row[x] for row in hot["encoder"]), 1.0, 1e-9)

    pts = ib.frontier_sweep(j, [3.0, 4.5, 6.0], tol=1e-10)
    assert [p["beta"] for p in pts] == [3.0, 4.5, 6.0]
    assert pts[0]["i_zy_bits"] <= pts[1]["i_zy_bits"] <= pts[2]["i_zy_bits"]

    # second-order predictions on a joint with an interior onset
    fig1 = ib.fig1_joint()
    pred = ib.predict_onset(fig1, tol=1e-12)
    assert pred["kappa"] > 0
    approx(pred["i1_zx_bits"], pred["beta_c"] * pred["i1_zy_bits"], 1e-6)
    approx(pred["l2_bits"], -pred["i1_zy_bits"] / 2, 1e-6)

    # Gaussian closed form: rho = 0.5 -> beta_c = 1 / rho^2 = 4
    beta_c, nu = ib.gaussian_onset([[1.0]], [[1.0]], [[0.5]])
    approx(beta_c, 4.0, 1e-12)
    assert len(nu) == 1
    disc = ib.discretize_gaussian(1.0, 1.0, 0.5, n_bins=96)
    exact_mi = -0.5 * math.log2(1 - 0.25)
    approx(disc.mutual_information(), exact_mi, 0.02 * exact_mi)

    # datagen + serialization round trip
    spec = '{"family": "gaussian", "mu": [0.0, 1.0], "sigma": [1.0, 1.0], "n_bins": 64}'
    bc = ib.binary_classification_joint(spec)
    assert bc.ny == 2
    nf = ib.noisy_function_joint('{"f": "quadratic", "sigma": 0.3}')
    assert nf.mutual_information() > 0.1
    rt = ib.JointDistribution.from_csv(bc.to_csv())
    approx(rt.mutual_information(), bc.mutual_information(), 1e-12)
    rt2 = ib.JointDistribution.from_json(bc.to_json())
    approx(rt2.mutual_information(), bc.mutual_information(), 1e-12)

    # error mapping
    try:
        ib.solve_onset(ib.JointDistribution([[0.25, 0.25], [0.25, 0.25]]))
    except ValueError as e:
        assert "no learning onset" in str(e)
    else:
        raise AssertionError("independent joint must raise")

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
