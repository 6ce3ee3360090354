"""Command-line experiment driver.

Every subcommand writes CSV to ``--out`` (stdout by default).  The first line
is a ``# config:`` comment carrying every parameter, the seed and the seeding
scheme, so a rerun with the same line reproduces the file byte for byte.

Exit codes: 0 success, 2 bad parameter, 3 capacity guard, 4 rejection cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from fractions import Fraction

import numpy as np

from rqclab import circuit, decoupler, gambler, string_chain, weight_chain
from rqclab.errors import CapacityError, DomainError, RejectionCapError
from rqclab.pauli import PauliString
from rqclab.stats import BLOCK_SIZE, block_rng, family_z_threshold, seeding_note

EXIT_OK = 0
EXIT_PARAM = 2
EXIT_GUARD = 3
EXIT_REJECTION = 4


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        return f"{float(x):.15g}"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.15g}"
    return str(x)


class Table:
    def __init__(self, header):
        self.buf = io.StringIO()
        self.writer = csv.writer(self.buf, lineterminator="\n")
        self.writer.writerow(header)

    def row(self, *values):
        self.writer.writerow([fmt(v) for v in values])

    def text(self) -> str:
        return self.buf.getvalue()


# --- subcommands -----------------------------------------------------------

def cmd_weight_evolve(a) -> Table:
    n = _need(a, "n")
    start = 1 if a.start is None else a.start
    t = 0 if a.t is None else a.t
    probs = weight_chain.evolve_exact(n, start, t)
    tab = Table(["k", "prob"])
    for k in range(1 if start >= 1 else 0, n + 1):
        tab.row(k, probs[k])
    return tab


def cmd_hitting_time(a) -> Table:
    n = _need(a, "n")
    chain = weight_chain.build(n)
    start = 1 if a.start is None else a.start
    target = a.target if a.target is not None else weight_chain.reference_points(n, a.delta).r_minus
    res = weight_chain.hitting_time_mc(chain, start, target, a.trials, t_max=a.t, seed=a.seed, threads=a.threads)
    tab = Table(["start", "target", "trial_count", "censored", "p50", "p90", "p99", "mean"])
    tab.row(start, target, res.trials, res.censored, res.quantile(0.5), res.quantile(0.9), res.quantile(0.99), res.mean)
    if a.hist:
        hist = Table(["t", "count"])
        for t, c in enumerate(res.histogram):
            if c:
                hist.row(t, c)
        with open(a.hist, "w") as fh:
            fh.write(config_line(a) + hist.text())
    return tab


def cmd_string_shells(a) -> Table:
    n = _need(a, "n")
    k = 1 if a.k is None else a.k
    if not 1 <= k <= n:
        raise DomainError(f"--k (weight of the start string) must lie in 1..{n}")
    mu = PauliString.from_symbols([1] * k + [0] * (n - k))
    t = 200 if a.t is None else a.t
    tab = Table(["k", "shell_size", "chi2", "dof", "pvalue"])
    for r in string_chain.empirical_uniformity(mu, t, a.trials, seed=a.seed, threads=a.threads):
        tab.row(r.k, r.shell_size, r.chi2, r.dof, r.pvalue)
    return tab


def cmd_gambler(a) -> Table:
    if a.a is None or a.p is None:
        raise DomainError("gambler needs --a and --p")
    inst = gambler.RuinInstance.constant(a.a, a.p, a.p_minus)
    exact = gambler.ruin_probability(inst)
    mc, se = gambler.ruin_mc(inst, a.trials, a.seed, a.threads)
    tab = Table(["a", "p_minus", "p", "exact", "mc", "stderr", "trials"])
    tab.row(inst.a, inst.p_minus, a.p, exact, mc, se, a.trials)
    return tab


def cmd_depth(a) -> Table:
    n = _need(a, "n")
    t = a.t if a.t is not None else math.ceil(n * math.log2(n) ** 2)
    tab = Table(["n", "t", "trial", "depth", "rejections"])
    if a.d is None:
        for i, d in enumerate(circuit.depth_samples(n, t, a.trials, a.seed, a.threads)):
            tab.row(n, t, i, d, 0)
        return tab
    for i in range(a.trials):
        s = circuit.sample_rqc_td(n, t, a.d, block_rng(a.seed, i))
        tab.row(n, t, i, s.levels.depth, s.rejections)
    return tab


def cmd_coverage(a) -> Table:
    n = _need(a, "n")
    t = a.t if a.t is not None else math.ceil(3 * n * math.log(n))
    rep = circuit.coverage_probability(n, t, a.trials, a.seed, a.threads)
    tab = Table(["n", "t", "trials", "covered", "bound"])
    tab.row(n, t, rep.trials, rep.covered, rep.bound)
    return tab


def cmd_decouple(a) -> Table:
    n = _need(a, "n")
    e = 2 if a.e is None else a.e
    s = 1 if a.k is None else a.k
    grid = a.grid or [0, 25, 50, 100, 200]
    if a.t is not None:
        grid = [a.t]
    rho = decoupler.bell_pairs_state(n, e)
    if not 0 <= s <= n:
        raise DomainError(f"--k (kept subset size) must lie in 0..{n}")
    points = decoupler.decoupling_curve(rho, range(s), grid, a.ensemble, a.trials, a.seed)
    tab = Table(["n", "e_qubits", "s", "t", "trials", "mean", "stderr"])
    for p in points:
        tab.row(n, e, s, p.t, p.trials, p.mean, p.stderr)
    return tab


def cmd_moment_check(a) -> Table:
    n = _need(a, "n")
    mu = PauliString.from_str(a.mu) if a.mu else PauliString.from_symbols([1] + [0] * (n - 1))
    if mu.n != n:
        raise DomainError(f"--mu has {mu.n} sites but --n is {n}")
    t = 1 if a.t is None else a.t
    rep = decoupler.moment_consistency(mu, t, a.trials, a.ensemble, a.seed)
    tab = Table(["nu", "empirical", "exact", "z"])
    for bits, (m, x, z) in enumerate(zip(rep.mean, rep.exact, rep.z)):
        tab.row(str(PauliString(n, bits)), m, x, z)
    print(
        f"max |z| = {rep.max_abs_z():.3f} (family 3-sigma threshold {family_z_threshold(len(rep.mean)):.3f})",
        file=sys.stderr,
    )
    return tab


COMMANDS = {
    "weight-evolve": (cmd_weight_evolve, "exact law of the weight chain after t steps"),
    "hitting-time": (cmd_hitting_time, "Monte Carlo hitting times of the weight chain"),
    "string-shells": (cmd_string_shells, "chi-square uniformity of each weight shell"),
    "gambler": (cmd_gambler, "ruin probability, closed form against Monte Carlo"),
    "depth": (cmd_depth, "greedy-leveled depth of random sequential circuits"),
    "coverage": (cmd_coverage, "chance that every qubit is touched"),
    "decouple": (cmd_decouple, "decoupling distance over a circuit-length grid"),
    "moment-check": (cmd_moment_check, "gate-level second moments against the string chain"),
}

BLOCKS = {"depth": 1024, "coverage": 16384, "decouple": 64, "moment-check": 8192}


def _need(a, name):
    v = getattr(a, name)
    if v is None:
        raise DomainError(f"--{name} is required for {a.command}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rqclab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--n", type=int)
        p.add_argument("--t", type=int)
        p.add_argument("--d", type=int)
        p.add_argument("--start", type=int)
        p.add_argument("--target", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--trials", type=int, default=10_000)
        p.add_argument("--delta", type=float, default=0.05)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default="-")
        if name == "gambler":
            p.add_argument("--a", type=int)
            p.add_argument("--p", type=float)
            p.add_argument("--p-minus", type=float)
        if name == "hitting-time":
            p.add_argument("--hist", help="also write the full t,count histogram here")
        if name in ("decouple", "moment-check"):
            p.add_argument("--ensemble", choices=[e.value for e in decoupler.GateEnsemble], default="haar")
        if name == "decouple":
            p.add_argument("--e", type=int, help="environment qubits (default 2)")
            p.add_argument("--grid", type=_int_list, help="comma-separated circuit lengths")
        if name == "moment-check":
            p.add_argument("--mu", help="start string over 0123, site 0 first")
    return parser


def config_line(a) -> str:
    skip = {"out", "hist"}
    items = [f"{k}={v}" for k, v in sorted(vars(a).items()) if k not in skip and v is not None]
    block = BLOCKS.get(a.command, BLOCK_SIZE)
    return f"# config: {' '.join(items)} seeding={seeding_note(a.seed, block)}\n"


def run(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_PARAM
    try:
        if a.trials < 1 or a.threads < 1:
            raise DomainError("--trials and --threads must be positive")
        tab = COMMANDS[a.command][0](a)
    except CapacityError as exc:
        print(f"rqclab: capacity guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except RejectionCapError as exc:
        print(f"rqclab: rejection cap: {exc}", file=sys.stderr)
        return EXIT_REJECTION
    except (DomainError, ValueError) as exc:
        print(f"rqclab: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    text = config_line(a) + tab.text()
    if a.out == "-":
        sys.stdout.write(text)
    else:
        with open(a.out, "w") as fh:
            fh.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
