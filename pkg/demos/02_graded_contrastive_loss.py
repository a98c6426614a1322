"""
Binary and graded contrastive losses
====================================

The binary contrastive loss pulls positives together and pushes
negatives beyond a margin. Its graded generalization blends both
branches by the pair's similarity, so a pair that half-overlaps is
half-attracted and half-repelled. The loss and its closed-form gradient
are compared against finite differences at the end.
"""

import numpy as np

from gvpr import LossConfig, cl_loss, gcl_grad_d, gcl_loss, pair_grad

cfg = LossConfig(tau=1.0)

# Loss as a function of descriptor distance, one column per similarity level.
distances = np.linspace(0.0, 1.6, 9)
levels = (0.0, 0.25, 0.5, 0.75, 1.0)
print("distance " + "  ".join(f"psi={p:4.2f}" for p in levels))
for d in distances:
    row = "  ".join(f"{gcl_loss(d, p, cfg):8.4f}" for p in levels)
    print(f"  {d:5.2f}  {row}")

# At the endpoints the graded loss IS the binary loss, bit for bit.
for d in (0.2, 0.7, 1.3):
    assert gcl_loss(d, 1.0, cfg) == cl_loss(d, 1.0, cfg)
    assert gcl_loss(d, 0.0, cfg) == cl_loss(d, 0.0, cfg)
print("\nendpoint reduction to the binary loss: exact")

# Descriptor-space gradients move both vectors symmetrically.
rng = np.random.default_rng(0)
fi, fj = rng.normal(size=4), rng.normal(size=4)
res = pair_grad(fi, fj, 0.5, cfg)
print(f"\npair with psi=0.5: loss={res.loss:.4f}")
print("grad_fi", np.round(res.grad_fi, 4))
print("grad_fj", np.round(res.grad_fj, 4), "(exact negation)")

# The analytic distance gradient matches central finite differences.
h = 1e-6
print("\ngradient check (analytic vs finite difference):")
for d, psi in ((0.3, 0.25), (0.9, 0.5), (1.4, 0.75)):
    fd = (gcl_loss(d + h, psi, cfg) - gcl_loss(d - h, psi, cfg)) / (2 * h)
    g = gcl_grad_d(d, psi, cfg)
    print(f"  d={d:.1f} psi={psi:.2f}: {g:+.6f} vs {fd:+.6f}")
