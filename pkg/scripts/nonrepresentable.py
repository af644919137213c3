#!/usr/bin/env python3
"""Partial sums of the dipole series that converges in the entrance space.

Each row reports the shift parameter, the squared increment against its
``2^-k`` budget, and the overlap sum of the atom measure built so far.  With
``a_k = k`` the overlap sum grows without bound although the increments stay
summable.
"""

import argparse

from skewconv import entrance as en
from skewconv import harness as hs
from skewconv import semigroup as sg


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--weights", choices=("one", "linear"), default="linear")
    args = p.parse_args(argv)
    spec = sg.heat_line()
    a = (lambda k: 1.0) if args.weights == "one" else (lambda k: float(k))
    ex = en.nonrepresentable_example(a, args.n, en.default_params(spec), spec)
    overlaps = hs.prefix_overlaps(ex.path.atoms)
    print("k\teps\tincrement2\tbudget\toverlap")
    for k, (e, d, ov) in enumerate(zip(ex.eps, ex.defects, overlaps), start=1):
        print(f"{k}\t{e:.6e}\t{d:.6e}\t{2.0**-k:.6e}\t{ov:.6e}")


if __name__ == "__main__":
    main()
