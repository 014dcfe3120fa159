"""Command-line entry point: ``qfin risk | balance | pick | decohere | replay``.

Every run prints one JSON document on stdout with a ``manifest`` block that
records the parameters, seed, RNG, package version and input digests. Timing
goes to stderr (and to ``--manifest-out`` when given) so stdout stays
byte-identical across reruns.

Exit codes: 0 success, 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import ast
import csv
import hashlib
import io
import json
import math
import operator
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import hhl, noise, qaoa, risk
from .gates import standard_gate
from .statevector import RNG_ALGORITHM, NormDriftError, PostSelectionError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class InputError(ValueError):
    """Malformed or inconsistent user input."""


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    seed: int | None
    rng: str = RNG_ALGORITHM
    version: str = __version__
    inputs: dict[str, str] = field(default_factory=dict)
    timing: dict | None = None

    def to_dict(self, with_timing: bool = False) -> dict:
        d = asdict(self)
        if not with_timing:
            d.pop("timing")
        return d


# ---------------------------------------------------------------- helpers

def _sha256(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


class _Inputs:
    """Reads input files (or packaged fixtures) and remembers their digests."""

    def __init__(self):
        self.digests: dict[str, str] = {}

    def read(self, path: str | None, fixture: str) -> str:
        if path is None:
            data = resources.files("qfin.data").joinpath(fixture).read_bytes()
            self.digests[f"fixture:{fixture}"] = _sha256(data)
        else:
            try:
                data = Path(path).read_bytes()
            except OSError as exc:
                raise InputError(f"cannot read {path}: {exc.strerror}") from exc
            self.digests[path] = _sha256(data)
        return data.decode("utf-8")


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_angle(text: str) -> float:
    """Arithmetic on numbers and ``pi``, e.g. ``pi/4`` or ``2*pi/7``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise InputError(f"unsupported angle expression {text!r}")

    try:
        return ev(ast.parse(text, mode="eval"))
    except SyntaxError as exc:
        raise InputError(f"cannot parse angle {text!r}") from exc


def read_labeled_matrix(text: str, extra: tuple[str, ...]) -> tuple[list[str], dict[str, np.ndarray], np.ndarray]:
    """Header ``asset,<extra...>,<label_1..label_n>``; one row per asset."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if len(rows) < 2:
        raise InputError("matrix CSV needs a header and at least one row")
    header = [h.strip() for h in rows[0]]
    k = len(extra)
    if [h.lower() for h in header[1:1 + k]] != list(extra):
        raise InputError(f"expected columns {', '.join(extra)} after the asset column, got {header[1:1 + k]}")
    labels = header[1 + k:]
    body = rows[1:]
    if len(labels) != len(body):
        raise InputError(f"matrix must be square: {len(labels)} columns, {len(body)} rows")
    try:
        values = np.array([[float(v) for v in r[1:]] for r in body])
    except ValueError as exc:
        raise InputError(f"non-numeric entry: {exc}") from exc
    if values.shape[1] != k + len(labels):
        raise InputError("ragged rows in matrix CSV")
    if [r[0].strip() for r in body] != labels:
        raise InputError("row labels must match the column labels")
    cols = {name: values[:, i] for i, name in enumerate(extra)}
    return labels, cols, values[:, k:]


def read_series(text: str) -> np.ndarray:
    """One P/L value per line, optionally preceded by a date column; non-numeric headers skipped."""
    vals = []
    for i, row in enumerate(csv.reader(io.StringIO(text))):
        if not row or not "".join(row).strip():
            continue
        try:
            vals.append(float(row[-1]))
        except ValueError:
            if i == 0:
                continue
            raise InputError(f"line {i + 1}: not a number: {row[-1]!r}") from None
    if not vals:
        raise InputError("empty P/L series")
    return np.array(vals)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _real_list(v) -> list:
    v = np.asarray(v)
    if np.iscomplexobj(v) and np.max(np.abs(v.imag), initial=0) > 1e-12:
        return [[float(z.real), float(z.imag)] for z in v]
    return [float(z) for z in np.real(v)]


# ---------------------------------------------------------------- commands

def cmd_risk(args, inputs: _Inputs) -> dict:
    alphas = tuple(args.alpha)
    out: dict = {}
    if args.series:
        if args.range is None:
            raise InputError("--series needs --range LO HI")
        series = read_series(inputs.read(args.series, ""))
        dist = risk.discretize(series, args.bins, tuple(args.range), args.outliers, label=args.series)
        out["continuous"] = risk.continuous_risk(series, alphas)
    elif args.probabilities:
        text = inputs.read(args.probabilities, "")
        weights = risk.parse_probability_array(text)
        edges = None
        if args.range is not None:
            edges = np.linspace(args.range[0], args.range[1], weights.size + 1)
        dist = risk.DiscreteDistribution.from_weights(weights, edges, args.probabilities)
    else:
        if args.bins not in risk.FIXTURE_RANGES:
            raise InputError("the built-in distribution exists for --bins 8 or 16")
        inputs.read(None, f"usd_fi_pl_{args.bins}bin.txt")
        dist = risk.load_fixture(args.bins)
    out["distribution"] = {"label": dist.label, "num_bins": dist.num_bins,
                           "probabilities": dist.probabilities,
                           "bin_edges": dist.bin_edges if dist.bin_edges is not None else None}
    out["classical"] = risk.classical_risk_oracle(dist, alphas).to_dict()
    quantum = {}
    if args.mode in ("exact", "both"):
        quantum["exact"] = risk.quantum_risk_report(dist, alphas, "exact").to_dict()
    if args.mode in ("sampled", "both"):
        quantum["sampled"] = risk.quantum_risk_report(dist, alphas, "sampled", args.shots, args.seed).to_dict()
    out["quantum"] = quantum
    return out


def _demo_system(name: str) -> hhl.LinearSystem:
    d = np.diag([1.0, 2.0, 3.0, 4.0])
    if name == "diag-demo":
        return hhl.LinearSystem(d, np.ones(4))
    h = np.kron(standard_gate("H").matrix, standard_gate("H").matrix).real
    return hhl.LinearSystem(h @ d @ h, np.array([0.0, 1.0, 1.0, 0.0]) / math.sqrt(2))


def cmd_balance(args, inputs: _Inputs) -> dict:
    shots = args.shots if args.mode == "sampled" else None
    if args.circuit in ("reference", "fig12"):
        theta = parse_angle(args.theta)
        a = np.array([[1.5, 0.5], [0.5, 1.5]])
        ref = hhl.classical_solve(hhl.LinearSystem(a, [math.cos(theta), math.sin(theta)]))
        res = hhl.hhl_2x2_reference(theta, args.mode, args.shots, args.seed)
        return {"circuit": "2x2-reference", "theta": theta, "hhl": res.to_dict(),
                "classical_normalized": _real_list(ref.normalized)}

    out: dict = {}
    spec = None
    if args.system:
        system = _demo_system(args.system)
        out["system_name"] = args.system
    else:
        labels, cols, cov = read_labeled_matrix(inputs.read(args.portfolio, "usd_fix_equity.csv"),
                                                ("return", "price"))
        spec = hhl.PortfolioSpec(cov, cols["return"], cols["price"], args.gain, args.budget)
        system = hhl.build_portfolio_system(spec)
        out["assets"] = labels
    classical = hhl.classical_solve(system)
    out["matrix"] = _real_list(system.matrix.ravel())
    out["rhs"] = _real_list(system.rhs)
    out["eigenvalues"] = _real_list(classical.eigenvalues)
    out["condition_number"] = classical.condition_number
    out["signed_spread_ratio"] = classical.signed_spread_ratio
    out["classical"] = {"solution": _real_list(classical.solution),
                        "normalized": _real_list(classical.normalized)}
    res = hhl.hhl_solve(system, args.clock_qubits, args.time_scale, args.mode, shots, args.seed)
    out["hhl"] = res.to_dict()
    if spec is not None:
        n = spec.returns.size
        out["classical"]["weights"] = _real_list(hhl.portfolio_weights(classical.solution, n))
        # HHL only returns a direction; fix the scale with the budget row P.w = B
        w = np.real(res.solution[2:2 + n])
        scale = spec.budget / float(spec.prices @ w) if spec.prices @ w != 0 else float("nan")
        out["hhl"]["weights"] = _real_list(w * scale)
    return out


def cmd_pick(args, inputs: _Inputs) -> dict:
    labels, cols, cov = read_labeled_matrix(inputs.read(args.data, "semis_returns_cov.csv"), ("return",))
    task = qaoa.build_portfolio_qubo(cols["return"], cov, args.m, tuple(args.lambdas), labels)
    table = qaoa.brute_force(task, qaoa.exactly_m_ones(args.m))
    out = {"assets": labels, "m": args.m, "lambdas": list(args.lambdas),
           "brute_force": {"rows": table.rows(),
                           "optimum": {"bitstring": table.optimum[0], "objective": table.optimum[1]},
                           "feasible_optimum": None if table.feasible_optimum is None else
                           {"bitstring": table.feasible_optimum[0], "objective": table.feasible_optimum[1]}}}
    if args.brute_force_only:
        return out
    cfg = qaoa.QaoaConfig(depth=args.depth, shots=args.shots, seed=args.seed,
                          max_iterations=args.max_iterations, restarts=args.restarts)
    res = qaoa.qaoa_solve(task, cfg)
    out["qaoa"] = res.to_dict()
    out["qaoa"]["feasible"] = res.bitstring.count("1") == args.m
    out["agreement"] = abs(res.objective - table.optimum[1]) < 1e-12
    return out


def cmd_decohere(args, inputs: _Inputs) -> dict:
    params = noise.NoiseParams(args.t1, args.t2, args.idle_step)
    run = noise.relaxation_experiment if args.mode == "relax" else noise.dephasing_experiment
    curve = run(params, args.idles, args.shots, args.seed)
    return {"channel": curve.channel, "max_deviation_std_errors": curve.max_z(),
            "curve": {"k": curve.idles, "p1": curve.p1, "expected": curve.expected},
            "csv": curve.to_csv()}


COMMANDS = {"risk": cmd_risk, "balance": cmd_balance, "pick": cmd_pick, "decohere": cmd_decohere}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qfin", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qfin {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, shots):
        sp.add_argument("--shots", type=int, default=shots)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--manifest-out", default=None, help="also write the full manifest (with timing) here")

    r = sub.add_parser("risk", help="expected value, std dev, VaR and CVaR of a P/L distribution")
    src = r.add_mutually_exclusive_group()
    src.add_argument("--probabilities", help="probability array file (sums to 1 or 100)")
    src.add_argument("--series", help="CSV of P/L values in bp (optional date column)")
    r.add_argument("--bins", type=int, default=8, help="number of bins (power of two)")
    r.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"), help="bin range in bp")
    r.add_argument("--outliers", choices=("clip", "drop"), default="clip")
    r.add_argument("--alpha", type=float, nargs="+", default=[0.95, 0.99])
    r.add_argument("--mode", choices=("exact", "sampled", "both"), default="both")
    common(r, 8192)

    b = sub.add_parser("balance", help="HHL solve of the bond/equity balancing system")
    b.add_argument("--portfolio", help="CSV: asset,return,price,<covariance columns>")
    b.add_argument("--gain", type=float, default=7.0, help="target expected return G")
    b.add_argument("--budget", type=float, default=1.0, help="budget B")
    b.add_argument("--system", choices=("diag-demo", "hadamard-demo"))
    b.add_argument("--circuit", choices=("reference", "fig12"),
                   help="run the fixed 2x2 reference circuit instead (fig12 is an alias)")
    b.add_argument("--theta", default="pi/4", help="right side (cos theta, sin theta) for the 2x2 circuit")
    b.add_argument("--clock-qubits", "-t", type=int, default=8)
    b.add_argument("--time-scale", type=float, default=None, help="default: from the Gershgorin bound")
    b.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    common(b, 8192)

    q = sub.add_parser("pick", help="choose m assets by QUBO + QAOA")
    q.add_argument("--data", help="CSV: asset,return,<covariance columns>")
    q.add_argument("--m", type=int, default=3)
    q.add_argument("--lambdas", type=float, nargs=3, default=[1.0, 4.0, 1.0], metavar=("L1", "L2", "L3"))
    q.add_argument("--depth", "-p", type=int, default=1)
    q.add_argument("--max-iterations", type=int, default=200)
    q.add_argument("--restarts", type=int, default=3)
    q.add_argument("--brute-force-only", action="store_true")
    common(q, 1024)

    d = sub.add_parser("decohere", help="T1 relaxation / T2 dephasing curves over idle steps")
    d.add_argument("--mode", choices=("relax", "dephase"), default="relax")
    d.add_argument("--t1", type=float, default=10.0, help="microseconds")
    d.add_argument("--t2", type=float, default=5.0, help="microseconds")
    d.add_argument("--idle-step", type=float, default=0.1, help="microseconds per identity gate")
    d.add_argument("--idles", type=int, default=200)
    d.add_argument("--format", choices=("json", "csv"), default="json")
    common(d, 8192)

    rp = sub.add_parser("replay", help="rerun a manifest (or a full JSON output) exactly")
    rp.add_argument("manifest")
    return p


_NOT_PARAMETERS = {"command", "manifest_out"}


def _execute(command: str, params: dict, manifest_out: str | None = None,
             expected_inputs: dict | None = None) -> tuple[str, RunManifest]:
    args = argparse.Namespace(**params)
    inputs = _Inputs()
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    result = COMMANDS[command](args, inputs)
    elapsed = time.perf_counter() - t0
    if expected_inputs is not None and expected_inputs != inputs.digests:
        raise InputError("input files differ from the ones recorded in the manifest")
    manifest = RunManifest(command, params, params.get("seed"), inputs=inputs.digests,
                           timing={"started": started.isoformat(), "seconds": elapsed})
    if command == "decohere" and params.get("format") == "csv":
        header = "# manifest: " + json.dumps(manifest.to_dict(), sort_keys=True)
        text = header + "\n" + result["csv"]
    else:
        doc = {"manifest": manifest.to_dict(), "result": result}
        text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    print(f"qfin {command}: {elapsed:.3f} s", file=sys.stderr)
    if manifest_out:
        Path(manifest_out).write_text(json.dumps(_jsonable(manifest.to_dict(with_timing=True)), indent=2) + "\n")
    return text, manifest


def _load_manifest(path: str) -> dict:
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if raw.startswith("# manifest: "):
        raw = raw.splitlines()[0][len("# manifest: "):]
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not JSON: {exc}") from exc
    man = doc.get("manifest", doc)
    if "subcommand" not in man or "parameters" not in man:
        raise InputError(f"{path} does not contain a run manifest")
    return man


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            man = _load_manifest(args.manifest)
            text, _ = _execute(man["subcommand"], man["parameters"], None, man.get("inputs"))
        else:
            params = {k: v for k, v in vars(args).items() if k not in _NOT_PARAMETERS}
            text, _ = _execute(args.command, params, args.manifest_out)
    except (PostSelectionError, hhl.SingularSystemError, NormDriftError, np.linalg.LinAlgError) as exc:
        print(f"qfin: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, ValueError, OSError) as exc:
        print(f"qfin: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
