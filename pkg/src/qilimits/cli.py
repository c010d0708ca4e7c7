"""Command-line front end.

Units: energies and brightnesses in photons (per mode for brightness), phases
in radians, probabilities dimensionless.  Every table row has the columns
``param,formula_id,value,regime,note``; numbers carry 12 significant digits.

Exit codes: 0 success, 1 a checked inequality or verification failed,
2 usage error (bad flags, invalid scenario, dimension budget exceeded).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds, fock
from .bounds import DetectionScenario, FadingScenario, PhotonDistribution
from .verify import SUITES, TransmitterSpec, build_hypothesis_pair, run_suite

COLUMNS = ("param", "formula_id", "value", "regime", "note")
CHECK_SLACK = 1e-9


class UsageError(ValueError):
    """Invalid flag combination; maps to exit code 2."""


@dataclass(frozen=True)
class Row:
    param: str
    formula_id: str
    value: float
    regime: str
    note: str = ""


def fmt(value: float) -> str:
    return format(value, ".12g")


def _report_row(param, rep: bounds.BoundReport) -> Row:
    notes = list(rep.flags)
    if rep.error_bar:
        notes.append(f"err<={fmt(rep.error_bar)}")
    return Row(param, rep.formula_id, rep.value, rep.kind, ";".join(notes))


def _check_rows(param, chain, slack=CHECK_SLACK):
    rows = []
    for (na, a), (nb, b) in zip(chain, chain[1:]):
        ok = a <= b + slack
        rows.append(Row(param, f"order:{na}<={nb}", b - a, "check", "OK" if ok else "VIOLATED"))
    return rows


# ---------------------------------------------------------------------------
# Evaluations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Options:
    """Flag values shared by all evaluation commands."""

    eta: float = 0.01
    phi: float = 0.0
    nb: float = 1.0
    energy: float | None = None
    prior0: float = 0.5
    mode_count: int = 1
    brightness: float | None = None
    transmitter: str = "tmsv"
    which: str = "bounds"
    eta_bar: float = 0.01
    pn_file: str | None = None
    dim_budget: int = fock.MAX_JOINT_DIM

    def resolved_energy(self) -> float:
        if self.brightness is not None:
            energy = self.mode_count * self.brightness
            if self.energy is not None and not math.isclose(self.energy, energy, rel_tol=1e-12, abs_tol=1e-12):
                raise UsageError("--energy disagrees with --mode-count x --brightness")
            return energy
        if self.energy is None:
            raise UsageError("give --energy or --brightness")
        return self.energy

    def resolved_brightness(self) -> float:
        return self.resolved_energy() / self.mode_count


def _load_pn(path):
    try:
        return PhotonDistribution.from_file(path)
    except OSError as exc:
        raise UsageError(f"cannot read p_n file: {exc}") from exc


def _with_pn(opt: Options):
    """Load the p_n file, taking the energy from its mean when no energy flag is given."""
    if not opt.pn_file:
        return opt, None
    p = _load_pn(opt.pn_file)
    if opt.energy is None and opt.brightness is None:
        opt = replace(opt, energy=p.mean)
    return opt, p


def eval_detect(opt: Options, param: str = "point") -> list:
    opt, p = _with_pn(opt)
    energy = opt.resolved_energy()
    s = DetectionScenario(opt.eta, energy, opt.nb, opt.phi, opt.prior0)
    if opt.transmitter == "tmsv":
        t = TransmitterSpec.tmsv(opt.resolved_brightness(), opt.mode_count)
    elif opt.mode_count != 1 and opt.brightness is not None:
        raise UsageError("a coherent transmitter is set by --energy alone")
    else:
        t = TransmitterSpec.coherent(energy)
    p = p or t.photon_distribution()
    rows = [_report_row(param, bounds.classical_pe_approx(s))]
    if opt.nb > 0:
        rows.append(_report_row(param, bounds.tmsv_pe_approx(s)))
    universal = bounds.universal_pe_lower_bound(s)
    specific = bounds.transmitter_pe_lower_bound(p, s)
    rows += [_report_row(param, universal), _report_row(param, specific)]
    if opt.transmitter == "tmsv" and not opt.pn_file:
        rows.append(_report_row(param, bounds.tmsv_pe_lower_bound(s, opt.mode_count)))
    chain = [("universal", universal.value), ("transmitter", specific.value)]
    if opt.which in ("exact", "both"):
        if opt.mode_count != 1:
            raise UsageError("exact evaluation needs --mode-count 1")
        if opt.pn_file:
            raise UsageError("exact evaluation builds the state from --transmitter, not a p_n file")
        pair = build_hypothesis_pair(t, s, budget=opt.dim_budget)
        pe = pair.helstrom_pe()
        fid = pair.fidelity()
        low, form = bounds.fvg_sandwich(fid, s.prior0, s.prior1)
        upper = math.sqrt(s.prior_product) * fid
        rows += [
            Row(param, "helstrom", pe, "exact", f"dims={pair.rho1.dims[0]}x{pair.rho1.dims[1]}"),
            Row(param, "fidelity", fid, "exact"),
            Row(param, "fidelity-squared", low, "bound"),
            Row(param, "fidelity-form", form, "bound"),
            Row(param, "fidelity-upper", upper, "bound", "upper bound on helstrom"),
        ]
        chain += [("fidelity-squared", low), ("fidelity-form", form), ("helstrom", pe), ("fidelity-upper", upper)]
    else:
        chain.append(("prior-product", s.prior_product))
    return rows + _check_rows(param, chain)


def eval_fade(opt: Options, param: str = "point") -> list:
    opt, p = _with_pn(opt)
    f = FadingScenario(opt.eta_bar, opt.resolved_energy(), opt.nb, opt.prior0)
    universal = bounds.fading_pe_lower_bound_universal(f)
    exact = bounds.fading_pe_lower_bound_exact(f)
    rows = [_report_row(param, universal), _report_row(param, exact)]
    chain = [("fading-universal", universal.value), ("fading-exact", exact.value)]
    if p is not None:
        rep = bounds.fading_pe_lower_bound_transmitter(p, f)
        rows.append(_report_row(param, rep))
        chain.append(("fading-transmitter", rep.value))
    chain.append(("prior-product", f.prior_product))
    return rows + _check_rows(param, chain)


def eval_estimate(opt: Options, param: str = "point") -> list:
    energy = opt.resolved_energy()
    n_s = opt.resolved_brightness()
    k_qi = bounds.qfi_bound_qi(opt.eta, opt.nb, energy)
    k_cl = bounds.qfi_bound_classical(opt.eta, opt.nb, energy)
    k_tm = bounds.qfi_tmsv(opt.eta, n_s, opt.nb, opt.mode_count)
    rows = [
        Row(param, "qfi-universal", k_qi, "bound"),
        Row(param, "qfi-classical", k_cl, "bound", "attained by coherent states"),
        Row(param, "qfi-tmsv", k_tm, "bound", "low-reflectance form"),
        Row(param, "qcrb-universal", bounds.qcrb(k_qi), "bound"),
        Row(param, "qcrb-classical", bounds.qcrb(k_cl), "bound"),
        Row(param, "qcrb-tmsv", bounds.qcrb(k_tm), "bound"),
        Row(param, "qfi-ratio", k_qi / k_cl, "bound", "universal/classical"),
    ]
    return rows + _check_rows(param, [("qfi-classical", k_cl), ("qfi-universal", k_qi)])


EVALUATORS = {"detect": eval_detect, "fade": eval_fade, "estimate": eval_estimate}

# sweepable flags and the Options field each one sets
AXES = {
    "eta": "eta",
    "phi": "phi",
    "nb": "nb",
    "energy": "energy",
    "prior0": "prior0",
    "brightness": "brightness",
    "eta-bar": "eta_bar",
}


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep of `axis` with the other flags held fixed."""

    command: str
    axis: str
    start: float
    stop: float
    points: int
    spacing: str = "lin"
    fixed: Options = field(default_factory=Options)

    def __post_init__(self):
        if self.command not in EVALUATORS:
            raise UsageError(f"unknown sweep command {self.command!r}")
        if self.axis not in AXES:
            raise UsageError(f"cannot sweep {self.axis!r}; choose from {sorted(AXES)}")
        if self.points < 2:
            raise UsageError("a sweep needs at least 2 points")
        if self.spacing == "log" and (self.start <= 0 or self.stop <= 0):
            raise UsageError("log spacing needs a positive range")
        if self.spacing not in ("lin", "log"):
            raise UsageError("spacing is 'lin' or 'log'")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list:
    """Rows for every axis point, in axis order (points may be evaluated concurrently)."""
    evaluate = EVALUATORS[spec.command]
    attr = AXES[spec.axis]

    def point(v):
        v = float(v)
        return evaluate(replace(spec.fixed, **{attr: v}), f"{spec.axis}={fmt(v)}")

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        parts = list(pool.map(point, spec.values()))
    return [r for part in parts for r in part]


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def render(rows, out: str) -> str:
    if out == "json":
        recs = [
            {"param": r.param, "formula_id": r.formula_id, "value": float(fmt(r.value)), "regime": r.regime, "note": r.note}
            for r in rows
        ]
        return json.dumps(recs, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([r.param, r.formula_id, fmt(r.value), r.regime, r.note])
    return buf.getvalue()


def verify_report(suite: str, seed: int, jobs: int = 1) -> tuple:
    checks = run_suite(suite, seed, jobs)
    ok = all(c.ok for c in checks)
    doc = {"suite": suite, "seed": seed, "ok": ok, "checks": [c.as_dict() for c in checks]}
    return ok, json.dumps(doc, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _scenario_flags(p, command):
    g = p.add_argument_group("scenario (energies in photons, phases in radians)")
    if command in ("detect", "estimate", "sweep"):
        g.add_argument("--eta", type=float, default=0.01, help="target reflectance in [0, 1) (default 0.01)")
    if command in ("detect", "sweep"):
        g.add_argument("--phi", type=float, default=0.0, help="phase on reflection, radians (default 0)")
        g.add_argument("--which", choices=("bounds", "exact", "both"), default="bounds",
                       help="closed forms, exact Fock computation (single mode), or both")
        g.add_argument("--dim-budget", type=int, default=fock.MAX_JOINT_DIM,
                       help="largest joint Fock dimension for exact evaluation")
    if command in ("fade", "sweep"):
        g.add_argument("--eta-bar", type=float, default=0.01, help="mean reflectance of a fading target (default 0.01)")
    g.add_argument("--nb", type=float, default=1.0, help="background photons per mode (default 1)")
    g.add_argument("--energy", type=float, help="total signal photons over all modes")
    g.add_argument("--brightness", type=float, help="signal photons per mode; energy = mode-count x brightness")
    g.add_argument("--mode-count", type=int, default=1, help="number of signal modes M (default 1)")
    if command in ("detect", "fade", "sweep"):
        g.add_argument("--prior0", type=float, default=0.5, help="prior probability of no target (default 0.5)")
        g.add_argument("--pn-file", help="photon-number law: one 'n p_n' pair per line, '#' comments")
    if command in ("detect", "sweep"):
        g.add_argument("--transmitter", choices=("tmsv", "coherent"), default="tmsv")


def _output_flags(p):
    p.add_argument("--out", choices=("csv", "json"), default="csv", help="output format (default csv)")
    p.add_argument("--output", "-o", help="write to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qilimits",
        description="Error-probability and Fisher-information limits for target detection with "
        "idler-assisted transmitters. Energies in photons, phases in radians.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detection bounds for a specular target")
    _scenario_flags(p, "detect")
    _output_flags(p)

    p = sub.add_parser("fade", help="detection bounds for a Rayleigh-fading target")
    _scenario_flags(p, "fade")
    _output_flags(p)

    p = sub.add_parser("estimate", help="reflectance QFI and Cramer-Rao floors")
    _scenario_flags(p, "estimate")
    _output_flags(p)

    p = sub.add_parser("verify", help="run cross-check suites; exit 1 on any failure")
    p.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p.add_argument("--seed", type=int, default=0, help="seed for random states and Monte Carlo")
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("--jobs", type=int, default=1, help="suites run concurrently")

    p = sub.add_parser("sweep", help="evaluate detect/fade/estimate along one axis")
    p.add_argument("target", choices=sorted(EVALUATORS))
    p.add_argument("--axis", required=True, choices=sorted(AXES))
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--spacing", choices=("lin", "log"), default="lin")
    p.add_argument("--jobs", type=int, default=1, help="points evaluated concurrently")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; sweeps are deterministic")
    _scenario_flags(p, "sweep")
    _output_flags(p)
    return parser


def _options(args) -> Options:
    fields = {}
    for name in Options.__dataclass_fields__:
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    return Options(**fields)


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            ok, text = verify_report(args.suite, args.seed, args.jobs)
            _emit(text, args.report)
            return 0 if ok else 1
        opt = _options(args)
        if args.command == "sweep":
            spec = SweepSpec(args.target, args.axis, args.start, args.stop, args.points, args.spacing, opt)
            rows = run_sweep(spec, args.jobs)
        else:
            rows = EVALUATORS[args.command](opt)
    except (UsageError, ValueError) as exc:
        print(f"qilimits: error: {exc}", file=sys.stderr)
        return 2
    _emit(render(rows, args.out), args.output)
    return 1 if any(r.note == "VIOLATED" for r in rows) else 0


if __name__ == "__main__":
    sys.exit(main())
