"""Smoke test for the dphase_py extension.

Build and stage the module first:

    cargo build -p dphase-py --features extension-module --release
    cp target/release/libdphase_py.so python/dphase_py.so
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import dphase_py as dp


def main():
    prob = dp.DoublePhase([(0.0, 1.0)], [129], p=3.0, q=2.0, weight="x1")
    assert prob.n_nodes == 129 and prob.n_cells == 128
    assert prob.hypothesis_warnings() == []

    bump = prob.bump()
    cells = prob.cell_values(bump)
    norm = prob.luxemburg_norm(cells)
    assert abs(prob.rho_theta([c / norm for c in cells]) - 1.0) < 1e-10

    eig = prob.principal_eigenvalue()
    lh = eig.lambda_hat1
    assert eig.residual <= 1e-7
    assert min(eig.eigenfunction[1:-1]) > 0.0
    assert prob.rayleigh_quotient(bump) >= lh - 1e-8
    print(eig)

    point = prob.nehari_project(eig.eigenfunction, 1.5 * lh)
    assert abs(point.t0 - point.t0_bisection) <= 1e-8 * point.t0
    assert point.energy > 0.0

    sol = prob.solve(1.5 * lh, starts=2, seed=1)
    assert sol.residual <= 1e-7 and sol.m_lambda > 0.0 and sol.min_u > 0.0
    assert math.isclose(prob.phi(sol.u_hat, 1.5 * lh), sol.m_lambda, rel_tol=1e-9)
    print(sol)

    try:
        prob.solve(0.5 * lh)
    except dp.InfeasibleError as e:
        print("infeasible as expected:", e)
    else:
        raise AssertionError("solve below the threshold must fail")

    cert = prob.certificate(0.9 * lh, lh, trials=50, seed=4)
    assert cert.violations == 0
    print(cert)

    try:
        dp.DoublePhase([(0.0, 1.0)], [33], p=1.5, q=2.0)
    except dp.DPhaseError as e:
        print("rejected:", e)
    else:
        raise AssertionError("q > p must be rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
