#!/usr/bin/env python3
"""Closability probe traces for a smooth initial state and a point-mass path.

The embedded path settles (successive differences shrink) while the heat
kernel path of a point mass has squared norms doubling per 4x time step.
A second table shows the sup of ``Re Psi_h(a) / h`` over unit ``a`` for the
point-mass law, which grows like ``h^(-1/2)``.
"""

import argparse

import numpy as np

from skewconv import entrance as en
from skewconv import sclaw as sc
from skewconv import semigroup as sg


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--steps", type=int, default=12, help="probe times 4^-1 .. 4^-steps")
    p.add_argument("--half-width", type=float, default=8.0)
    p.add_argument("--count", type=int, default=321)
    args = p.parse_args(argv)
    spec = sg.heat_line(args.half_width, args.count)
    times = en.default_probe_times(args.steps)
    smooth = en.embed_J(spec, spec.discretize(lambda x: np.exp(-x[:, 0] ** 2)))
    point = en.HeatMeasure(spec, en.SignedMeasureAtoms.from_pairs([(0.0, 1.0)]))

    print("path\ts\tnorm2\tdiff\tratio")
    for name, path in (("embedded", smooth), ("point_mass", point)):
        res = en.closability_probe(path, times)
        for j, s in enumerate(res.times):
            diff = res.diffs[j - 1] if j else float("nan")
            ratio = res.ratios[j - 1] if j else float("nan")
            print(f"{name}\t{s:.3e}\t{res.norms2[j]:.6e}\t{diff:.3e}\t{ratio:.4f}")
        print(f"# {name}: verdict {res.verdict}")

    law = sc.IDLaw(gaussian=((1.0, point),), carrier="entrance")
    trace = sc.difference_quotient_trace(sc.SCSemigroupSpec("entrance", law, spec),
                                         [0.16 / 16**k for k in range(4)])
    print("h\tsup_quotient\tratio")
    for j, (h, v) in enumerate(zip(trace.h, trace.sup_quotient)):
        ratio = trace.ratios[j - 1] if j else float("nan")
        print(f"{h:.3e}\t{v:.6e}\t{ratio:.4f}")


if __name__ == "__main__":
    main()
