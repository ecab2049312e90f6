"""Time the compiled kernels against the pure-python fallback.

Runs the same workloads through both implementations, checks the traces
agree, and prints per-step cost and speedup.  The fallback exists for
portability and reference, not speed; this script documents the gap so a
slow install is recognized as a missing extension rather than a bug.

    python3 benchmarks/compare_kernels.py [--repeat N]
"""
import argparse
import sys
import time

import numpy as np

import neuromix._core_py as pure
import neuromix.network as nw
import neuromix.sim as sim
from neuromix import models
from neuromix.core import mixed_feedback_spec

try:
    import neuromix._core as compiled
except ImportError:
    compiled = None

BURSTER = mixed_feedback_spec()
DT = 0.05


def net_workload(name, specs_or_net, t_end):
    if isinstance(specs_or_net, nw.NetworkSpec):
        asm = nw.assemble_network(specs_or_net)
        desc, y0 = asm.desc, asm.initial_state()
    else:
        desc = sim.build_net_desc(specs_or_net, [-0.95])
        y0 = sim.rest_state(specs_or_net, -0.95)
    seg = sim.build_protocol(desc, [])
    n_steps = int(round(t_end / DT))

    def run(mod):
        return mod.net_run(desc, seg, y0, 0.0, DT, n_steps, 10)

    return name, n_steps, run


def model_workload(name, mdl, i_app, t_end, dt):
    seg = sim.build_protocol({}, [])
    y0 = mdl.rest(i_app)
    n_steps = int(round(t_end / dt))

    def run(mod):
        return mod.model_run(mdl.kernel_id, mdl.kernel_params, seg, y0,
                             0.0, dt, n_steps, 10, i_app)

    return name, n_steps, run


def best_time(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3,
                    help="timing repeats for the compiled side (best-of)")
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; nothing to compare against",
              file=sys.stderr)
        return 1

    hh = models.build_hodgkin_huxley()
    workloads = [
        net_workload("burster, 1 cell, 2000 units", BURSTER, 2000.0),
        net_workload("half-center, 2 cells + 2 synapses, 1500 units",
                     nw.build_half_center(BURSTER, -0.3, -0.5, i_base=-0.95),
                     1500.0),
        net_workload("hub circuit, 5 cells, 600 units",
                     nw.build_stg(mixed_feedback_spec(alpha_ultra_pos=2.4),
                                  mixed_feedback_spec(alpha_ultra_pos=1.6),
                                  mixed_feedback_spec(alpha_slow_neg=0.98),
                                  0.05, -0.3, -0.5, i_base=-0.95),
                     600.0),
        model_workload("squid model, 100 ms at dt=0.01", hh, 0.0, 100.0, 0.01),
        model_workload("R15 model, 2 s at dt=0.05",
                       models.build_aplysia_r15(), 0.0, 2000.0, 0.05),
    ]

    header = f"{'workload':44} {'steps':>7} {'pure':>10} {'compiled':>10} {'ratio':>7}"
    print(header)
    print("-" * len(header))
    for name, n_steps, run in workloads:
        t_c, out_c = best_time(lambda: run(compiled), args.repeat)
        t_p, out_p = best_time(lambda: run(pure), 1)  # >100x slower; once is enough
        dv = float(np.max(np.abs(out_p[1] - out_c[1])))
        if dv > 1e-9:  # same algorithm, same step; only roundoff may differ
            print(f"PARITY FAILURE on '{name}': max |dv| = {dv:.3e}",
                  file=sys.stderr)
            return 1
        print(f"{name:44} {n_steps:>7} {t_p * 1e6 / n_steps:>8.2f}us"
              f" {t_c * 1e6 / n_steps:>8.3f}us {t_p / t_c:>6.0f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
