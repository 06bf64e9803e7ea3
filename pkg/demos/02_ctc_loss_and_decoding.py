#!/usr/bin/env python3
"""CTC from first principles: the collapse map, the loss against literal
path enumeration, and why greedy best-path decoding is only approximate."""

import numpy as np

from convctc.ctc import best_path_decode, collapse, ctc_loss, enumerate_oracle
from convctc.tensor import logsumexp

BLANK, A, B, C = 0, 1, 2, 3
names = {BLANK: "-", A: "a", B: "b", C: "c"}


def show(path):
    out = collapse(path, 4)
    print(f"  sigma({','.join(names[s] for s in path)}) = "
          f"({','.join(names[s] for s in out)})")


print("== the collapse map: merge repeats, then drop blanks ==")
for path in [(A, B, C, BLANK, BLANK), (A, B, BLANK, C, C), (A, A, B, B, C),
             (BLANK, A, BLANK, B, C), (BLANK, BLANK, A, B, C)]:
    show(path)
print("  ...all five are alignments of (a,b,c)")
show((A, BLANK, A))
print("  the blank is what lets a label legitimately repeat")

print("\n== the loss is a sum over every alignment ==")
lp = np.log(np.full((2, 2), 0.5))       # two frames, uniform over {-, a}
loss, lattice = ctc_loss(lp, [A])
pr = enumerate_oracle(lp, [A])
print(f"T=2, p(-)=p(a)=0.5, target (a): paths aa, a-, -a  ->  Pr = {pr}")
print(f"dynamic program: exp(-loss) = {np.exp(-loss):.6f}  (same)")

print("\nthe alpha/beta lattice tells the same total at every frame:")
for t in range(2):
    print(f"  logsumexp(alpha[:,{t}] + beta[:,{t}]) = "
          f"{logsumexp(lattice.alpha[:, t] + lattice.beta[:, t]):.6f}")

print("\n== a target can simply not fit ==")
loss, lattice = ctc_loss(lp, [A, A])
print(f"target (a,a) in 2 frames needs a,-,a: loss = {loss}, "
      f"feasible = {lattice.feasible}")

print("\n== greedy decoding is not max-probability-sequence decoding ==")
lp = np.log(np.array([[0.6, 0.6], [0.4, 0.4]]))
print("per-frame: p(-)=0.6 beats p(a)=0.4, so the best path is (-,-)")
print(f"  best_path_decode -> {best_path_decode(lp)}  with Pr {enumerate_oracle(lp, []):.2f}")
print(f"  but the sequence (a) collects Pr {enumerate_oracle(lp, [A]):.2f} "
      f"across its three alignments")
