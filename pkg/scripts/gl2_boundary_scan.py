"""The gl₂ example: bulk and boundary residuals over a λ sample, N = 2, 3.

Compares the corrected f, g with the literal grouping.  Writes
results/gl2_boundary_scan.json.
"""
import json
from pathlib import Path

from quadbraid.hamiltonians import gl2_example_H
from quadbraid.models import gl2_model
from quadbraid.sampling import Sampler

OUT = Path(__file__).resolve().parents[1] / "results" / "gl2_boundary_scan.json"


def main():
    rows = []
    for gamma, xi in [(0.2, 1.1), (0.2, 1.7), (0.35, 0.6)]:
        lams = Sampler(1, 2).lams(8, gl2_model(gamma, xi).guard)
        for N in (2, 3):
            rep = gl2_example_H(N, lams, gamma, xi)
            r = rep.residuals
            rows.append({"gamma": gamma, "xi": xi, "N": N, **r, "locality": rep.locality["passed"]})
            print(f"gamma={gamma} xi={xi} N={N}: bulk {r['bulk']:.1e}, boundary {r['boundary']:.1e}, "
                  f"literal f,g {r['boundary_literal']:.3g}, locality {rep.locality['passed']}")
    OUT.parent.mkdir(exist_ok=True)
    OUT.write_text(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
