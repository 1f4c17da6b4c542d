"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--scale S3] [--repeat 5] [--generations 20]

Kernel calls are timed in-process against both modules directly. The full GA
run is timed in a subprocess per backend, since the backend is fixed at import.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from placesim import _pykernels
from placesim.fitness import DEFAULT_WEIGHTS
from placesim.ga import first_fit_decreasing
from placesim.harness import ScaleConfig, generate_scenario
from placesim.kernels import compiled_available

GA_SNIPPET = """
import json, sys, time
from placesim import kernels
from placesim.ga import GAParams, dsom_schedule
from placesim.harness import ScaleConfig, generate_scenario
s = generate_scenario(ScaleConfig.parse(sys.argv[1]), 0)
t0 = time.perf_counter()
res = dsom_schedule(s, params=GAParams(max_generations=int(sys.argv[2]), seed=0))
print(json.dumps({"backend": kernels.BACKEND, "seconds": time.perf_counter() - t0,
                  "fitness": res.best_fitness.total}))
"""


def kernel_timings(mod, scenario, repeat):
    p = scenario.arrays
    w = DEFAULT_WEIGHTS.as_tuple()
    base = first_fit_decreasing(scenario)
    rng = np.random.default_rng(0)
    scrambled = rng.integers(0, scenario.n_machines, size=scenario.n_containers).astype(np.int64)

    def repair_once():
        x = scrambled.copy()
        ev = mod.evict_overloaded(p, x)
        mod.reinsert(p, x, p.decreasing_order(ev), -1, *w)

    out = {}
    for name, fn, number in [("evaluate", lambda: mod.evaluate(p, base, *w), 200),
                             ("repair", repair_once, 3)]:
        t = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
        out[name] = t
    return out


def ga_timing(scale, generations, pure):
    env = dict(os.environ)
    env.pop("PLACESIM_PURE_PYTHON", None)
    if pure:
        env["PLACESIM_PURE_PYTHON"] = "1"
    res = subprocess.run([sys.executable, "-c", GA_SNIPPET, scale, str(generations)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", default="S3")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--generations", type=int, default=20)
    args = ap.parse_args(argv)

    scenario = generate_scenario(ScaleConfig.parse(args.scale), 0)
    mods = {"python": _pykernels}
    if compiled_available():
        from placesim import _ckernels
        mods["cython"] = _ckernels
    else:
        print("compiled extension not built; timing the fallback only")

    rows = {name: kernel_timings(mod, scenario, args.repeat) for name, mod in mods.items()}
    print(f"scale {scenario.name}: {scenario.n_containers} containers, {scenario.n_machines} machines")
    print(f"{'kernel':<10}" + "".join(f"{n:>14}" for n in mods) + (f"{'speedup':>10}" if len(mods) > 1 else ""))
    for k in ("evaluate", "repair"):
        line = f"{k:<10}" + "".join(f"{rows[n][k] * 1e6:>12.1f}us" for n in mods)
        if len(mods) > 1:
            line += f"{rows['python'][k] / rows['cython'][k]:>9.1f}x"
        print(line)

    ga = {n: ga_timing(args.scale, args.generations, n == "python") for n in mods}
    line = f"{'ga run':<10}" + "".join(f"{ga[n]['seconds']:>13.2f}s" for n in mods)
    if len(mods) > 1:
        line += f"{ga['python']['seconds'] / ga['cython']['seconds']:>9.1f}x"
        # both backends follow the same arithmetic, so the runs must agree exactly
        assert ga["python"]["fitness"] == ga["cython"]["fitness"], ga
    print(line + f"   ({args.generations} generations)")


if __name__ == "__main__":
    main()
