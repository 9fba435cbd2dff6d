"""Two-point space: a Hamiltonian that mixes the points breaks weak uncertainty.

The failing commutator [a, bdot] has the off-diagonal entry
i phi (a1 - a2)(b2 - b1); the script prints it next to the measured value.
"""
import numpy as np

from ncqm.axioms import check_weak_uncertainty
from ncqm.models import ModelSpec, build_model

b = build_model(ModelSpec("finite_sum", {"blocks": [1, 1]}))
for phi in (0.0, 0.3, 0.7 + 0.2j):
    H = np.array([[1.0, phi], [np.conj(phi), -1.0]])
    rep = check_weak_uncertainty(b, H)
    a, c = np.diag([1.0, 0.0]), np.diag([2.0, -0.5])
    cdot = 1j * (H @ c - c @ H)
    X = a @ cdot - cdot @ a
    print(f"phi={phi}: weak {rep.verdict} (residual {rep.residual_max:.3e}), "
          f"[a, cdot]_01 = {X[0, 1]:.4f}, predicted {1j * phi * (1 - 0) * (-0.5 - 2.0):.4f}")
