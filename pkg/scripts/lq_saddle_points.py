"""Compare feedback and open-loop saddle points of a scalar zero-sum LQ game.

Usage: python3 scripts/lq_saddle_points.py [horizon] [r2]
"""

import sys

import numpy as np

from isred import lq
from isred.core import compose_actions
from isred.errors import SolverError


def main(argv):
    horizon = int(argv[0]) if argv else 2
    r2 = float(argv[1]) if len(argv) > 1 else 3.0
    model = lq.LqStageModel.scalar_zero_sum(horizon, q=1.0, r2=r2)
    try:
        fb = lq.feedback_spe(model)
        ol = lq.openloop_spe(model, "OL")
    except SolverError as exc:
        print(f"no saddle point: {exc}")
        return 1
    print(f"horizon {horizon}, r2 = {r2}")
    for t, gains in enumerate(fb.gains):
        print(f"  stage {t}: feedback gains " + ", ".join(f"{g.item():+.6f}" for g in gains))
    acts_fb = compose_actions(lq.lq_game(model, "F"), fb.profile(model)).gains
    acts_ol = compose_actions(lq.lq_game(model, "OL"), ol.profile).gains
    gap = max(float(np.max(np.abs(a - b))) for a, b in zip(acts_fb, acts_ol))
    print(f"  saddle value from initial state 1: {fb.value(np.ones(1)):.10f}")
    print(f"  largest realized action gap between feedback and open loop: {gap:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
