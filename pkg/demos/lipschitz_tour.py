"""Probe the operator zoo and show how M-hat steers the solver settings.

Smoothers sit just below one, sharpeners and tone curves above it.  The
damping mu and the largest stable step both follow from that number.
"""

from rendition import derive_mu, estimate_lipschitz, max_stable_step
from rendition.operators import build_operator

SPECS = [
    "gauss:size=5,sigma=1",
    "disk:d=5",
    "bilat:ss=2,sr=1.5",
    "median:h=3,w=3",
    "sigmoid:a=0.25",
    "unsharp:base=[bilat:ss=2,sr=1.5],alpha=1",
    "resample:q=2",
    "compose:[unsharp:base=[bilat:ss=10,sr=3],alpha=1;gamma:g=0.65]",
]

print(f"{'operator':66s} {'M-hat':>6s} {'mu':>6s} {'max step':>8s}")
for spec in SPECS:
    m = estimate_lipschitz(build_operator(spec)).m_hat
    mu = derive_mu(m)
    print(f"{spec:66s} {m:6.3f} {mu:6.3f} {max_stable_step(mu, m):8.3f}")
