#!/usr/bin/env python3
"""Error of the right-endpoint OU scheme on a single deterministic jump.

Prints one TSV row per substep count with the error and its ratio to the
previous row; first-order convergence shows up as ratios near 0.5.
"""

import argparse

import numpy as np

from skewconv import entrance as en
from skewconv import oupath as ou
from skewconv import semigroup as sg
from skewconv.grid import GridFunction, vector


def matrix_errors(ms, tau, t):
    spec = sg.matrix_semigroup([[-1.0, 0.5], [0.0, -2.0]])
    params = en.default_params(spec)
    x0, v = en.embed_J(spec, vector([1.0, -1.0])), en.embed_J(spec, vector([0.3, -0.4]))
    exact = ou.single_jump_exact(x0, v, tau, t)
    return [en.entrance_norm(ou.ou_state(x0, ou.jump_driver(v, tau), t, m) - exact, params) for m in ms]


def heat_errors(ms, tau, t, section):
    spec = sg.heat_line()
    zero = en.embed_J(spec, GridFunction(np.zeros(spec.grid.size), spec.grid))
    d = en.HeatMeasure(spec, en.SignedMeasureAtoms.from_pairs([(0.0, 1.0)]))
    a = spec.discretize(lambda p: np.exp(-p[:, 0] ** 2 / 2))
    want = en.section_pairing(ou.single_jump_exact(zero, d, tau, t), [section], a)[0]
    return [abs(en.section_pairing(ou.ou_state(zero, ou.jump_driver(d, tau), t, m), [section], a)[0] - want)
            for m in ms]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--tau", type=float, default=0.5, help="jump time")
    p.add_argument("--t", type=float, default=1.0, help="evaluation time")
    p.add_argument("--section", type=float, default=0.1, help="section offset for the heat pairing")
    p.add_argument("--m", type=int, nargs="+", default=[4, 8, 16, 32, 64, 128])
    args = p.parse_args(argv)
    rows = {"matrix_entrance_norm": matrix_errors(args.m, args.tau, args.t),
            "heat_delta_pairing": heat_errors(args.m, args.tau, args.t, args.section)}
    print("case\tn_sub\terror\tratio")
    for case, errs in rows.items():
        for i, (m, e) in enumerate(zip(args.m, errs)):
            ratio = e / errs[i - 1] if i else float("nan")
            print(f"{case}\t{m}\t{e:.6e}\t{ratio:.4f}")


if __name__ == "__main__":
    main()
