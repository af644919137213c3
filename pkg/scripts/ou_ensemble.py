#!/usr/bin/env python3
"""Monte Carlo check of an OU ensemble described by a config file.

Prints the empirical characteristic functional of every (time, test
function) pairing next to its closed form, and the sampled second moment
of ``X_t - T_t x0`` against the exact value.
"""

import argparse
import time

from skewconv import harness as hs
from skewconv import oupath as ou
from skewconv.config import build, load_config, with_seed
from skewconv.sclaw import second_moment


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("config")
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args(argv)
    exp = build(with_seed(load_config(args.config), args.seed))
    ens = hs.make_ensemble(exp)
    start = time.perf_counter()

    print("t\ttest\tsection\temp_re\temp_im\ttarget_re\ttarget_im\tz")
    for j, c in enumerate(ou.charfn_checks(ens, hs.ou_functionals(exp), args.paths, jobs=args.jobs)):
        f, e = c.functional, c.estimate.value
        print(f"{f.t:g}\t{j % len(hs.test_functions(exp))}\t{f.section:g}\t{e.real:.6f}\t{e.imag:.6f}"
              f"\t{c.target.real:.6f}\t{c.target.imag:.6f}\t{c.z:.2f}")

    t, sig = exp.config.simulation.times[-1], exp.config.simulation.section
    exact = second_moment(exp.sc, t + sig).direct - (second_moment(exp.sc, sig).direct if sig else 0.0)
    est = ou.mc_second_moment(ens, t, args.paths, section=sig, jobs=args.jobs)
    print(f"# second moment at t={t:g}: {est.value.real:.6f} +- {est.se_re:.6f} (exact {exact:.6f})")
    print(f"# {args.paths} paths in {time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    main()
