"""NC torus at theta = 1/5: relations, a gauge Hamiltonian, the axiom checks and a Dirac operator.

The gauge term enters as a_1 + a_1^o, so the uncertainty checks pass while
the reality check (J-invariance of the dynamics) fails.
"""
from ncqm.axioms import check_reality, check_strong_uncertainty, check_weak_uncertainty
from ncqm.dynamics import HamiltonianSpec, assemble_hamiltonian, dirac_identity_residuals
from ncqm.models import ModelSpec, build_model, relation_residuals

b = build_model(ModelSpec("nc_torus", {"N": 5, "theta": "1/5"}, window_margin=1))
for name, r in relation_residuals(b).items():
    print(f"relation {name}: {r:.1e}")

term = {"word": ["U1"], "coeff": [0.3, 0.0]}
adj = {"word": ["U1*"], "coeff": [0.3, 0.0]}
hs = HamiltonianSpec("nc_torus", coeffs=[[1.0, 0.2], [0.2, 0.9]], gauge=[[term, adj], []])
H = assemble_hamiltonian(b, hs)
for check in (check_weak_uncertainty, check_strong_uncertainty, check_reality):
    rep = check(b, H)
    print(f"{rep.check}: {rep.verdict} (max residual {rep.residual_max:.1e})")
print("Dirac identities:", {k: f"{v:.1e}" for k, v in dirac_identity_residuals(b, hs).items()})
