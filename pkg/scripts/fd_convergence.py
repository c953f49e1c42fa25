"""Step-size sweep of the finite-difference log-derivative.

For the six-vertex SP chain the closed form is exact, so the residual
against it exposes truncation (∝ h⁴, or h⁶ after one Richardson level)
versus roundoff (∝ 1/h).  Writes results/fd_convergence.json.
"""
import json
from pathlib import Path

from quadbraid.chains import ChainSpec
from quadbraid.hamiltonians import closed_form_H
from quadbraid.models import control_sixvertex
from quadbraid.sampling import Sampler

OUT = Path(__file__).resolve().parents[1] / "results" / "fd_convergence.json"


def main():
    chain = ChainSpec(control_sixvertex(), 3)
    lams = Sampler(0, 2).lams(2)
    rows = []
    for r in (0, 1):
        for h in (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4, 1e-5):
            try:
                res = closed_form_H(chain, lams, h=h, richardson=r, per_term=False).residual
            except Exception as e:  # nonconvergence at coarse steps is itself a data point
                res = None
                print(f"richardson={r} h={h:g}: {type(e).__name__}")
            else:
                print(f"richardson={r} h={h:g}: residual {res:.2e}")
            rows.append({"richardson": r, "h": h, "residual": res})
    OUT.parent.mkdir(exist_ok=True)
    OUT.write_text(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
