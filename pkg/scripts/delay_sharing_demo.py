"""Best-response iteration on a two-player one-step delay-sharing LQG team.

Usage: python3 scripts/delay_sharing_demo.py [max_iter]
"""

import sys

from isred import lq
from isred.equilibria import best_response_iteration, solve_affine_stationary
from isred.harness import delay_sharing_instance
from isred.model import AffinePolicy, PolicyProfile


def main(argv):
    max_iter = int(argv[0]) if argv else 200
    game = lq.delay_sharing_game(delay_sharing_instance(), "SDOS")
    init = PolicyProfile(tuple(AffinePolicy.zeros(dm.size, game.info_dim(d)) for d, dm in enumerate(game.dms)),
                         game.variant)
    trace = best_response_iteration(game, init, max_iter=max_iter)
    sol = solve_affine_stationary(game)
    for k, r in enumerate(trace.ratios[:10]):
        print(f"  step {k + 1}: contraction ratio {r:.4f}")
    print(f"converged={trace.converged} after {trace.iterations} iterations, observed ratio {trace.contraction:.4f}")
    for dm, p, q in zip(game.dms, trace.profile.policies, sol.profile.policies):
        print(f"  {dm.name}: iterate {p.gain.ravel().round(6)} vs direct solve {q.gain.ravel().round(6)}")
    return 0 if trace.converged else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
