"""Hop probability as a function of the waiting time t2, three evaluators side by side."""
import argparse

import numpy as np

from chronocollapse.exact import H0InitialState, hop_probability


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--t1", type=float, default=25.0)
    ap.add_argument("--probs", type=float, nargs=2, default=(0.5, 0.5))
    args = ap.parse_args()
    init = H0InitialState.from_probabilities([0, 1], list(args.probs))
    print("t2,closed_form,window_integrals,quadrature,flags")
    for t2 in np.geomspace(10.0, 1e4, 7):
        hp = hop_probability(init, args.lam, args.t1, float(t2), 0, 1)
        print(f"{t2:.6g},{hp.closed_form:.6e},{hp.window_integrals:.6e},{hp.quadrature:.6e},{'|'.join(hp.flags)}")


if __name__ == "__main__":
    main()
