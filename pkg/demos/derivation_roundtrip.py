"""Split a random torus derivation into standard and inner parts and compare with the truth."""
import numpy as np

from ncqm.derivations import check_diophantine, decompose_derivation, random_derivation, synthesize
from ncqm.models import nc_torus_lambda

lam = nc_torus_lambda((5**0.5 - 1) / 2)
print(check_diophantine(lam).notes)
R = 6
standard, inner = random_derivation(R, lam, np.random.default_rng(0))
dec = decompose_derivation(synthesize(R, lam, standard, inner))
print("inner error   ", np.abs(dec.inner - inner).max())
print("standard error", max(np.abs(dec.standard[k] - standard[k]).max() for k in range(2)))
print("branch agreement", dec.branch_agreement)
