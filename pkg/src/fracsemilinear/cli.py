"""Batch experiment runner.

Every subcommand takes an optional JSON config (``--config``), overlays the
flags that were given, validates the result against its schema and writes a
CSV or JSON table.  Outputs carry the package version and the SHA-256 of the
canonical config so that identical inputs give byte-identical files.

Exit codes: 0 success, 1 config or domain error, 2 numerical divergence,
3 non-convergence, 4 golden-value mismatch in ``regress``.
"""

from __future__ import annotations

import hashlib
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass

import click
import jsonschema
import numpy as np

from . import __version__
from .ball_kernels import green, killing, martin, modified_martin, poisson
from .config_schemas import SCHEMAS, defaults
from .estimates import (
    GridSpec,
    PreconditionError,
    ProfileSpec,
    audit_kernel_estimate,
    green_profile,
    poisson_profile,
    poisson_regime_fit,
)
from .levy import DomainError, StableModel, sphere_area
from .mc import MCBiasError, WoSConfig, wos_green, wos_poisson
from .potentials import (
    ExteriorDensity,
    ScalarField,
    exit_time_exact,
    green_potential,
    green_potential_radial,
    kato_check,
    poisson_potential,
    radial_grid,
)
from .quadrature import Ball, DivergenceError, QuadratureBudgetError
from .solver import (
    Bump,
    ContractionError,
    NonConvergenceError,
    ProblemSpec,
    SolverError,
    SupersolutionBreachError,
    _data_shape,
    data_potential,
    integral_criterion,
    monotone_solve,
    nonexistence_diagnostic,
    picard_solve,
    supersolution_fit,
)
from .trace import N_MOMENTS, LimitError, kernel_derivative, normal_derivative_dV, trace_measure

EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_NONCONVERGENCE = 3
EXIT_MISMATCH = 4


class CliFailure(Exception):
    """Carries an exit code, a message and an optional partial table."""

    def __init__(self, code: int, message: str, table: "Table | None" = None):
        super().__init__(message)
        self.code = code
        self.table = table


@dataclass
class Table:
    columns: list
    rows: list
    status: str = "ok"


# ---------------------------------------------------------------------------
# config handling and output


def canonical(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(doc: dict) -> str:
    return hashlib.sha256(canonical(doc).encode("utf-8")).hexdigest()


def load_config(command: str, path: str | None, flags: dict) -> dict:
    doc: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliFailure(EXIT_CONFIG, f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise CliFailure(EXIT_CONFIG, "config must be a JSON object")
    for key, val in flags.items():
        if val is None or val == ():
            continue
        doc[key] = list(val) if isinstance(val, tuple) else val
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"  {'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise CliFailure(EXIT_CONFIG, "config does not match the schema:\n" + "\n".join(lines))
    return defaults(command, doc)


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else ("true" if v else "false")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.16e" % float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_fmt(x) for x in v)
    return str(v).replace(",", ";")


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


def render(command: str, doc: dict, table: Table, fmt: str) -> str:
    h = config_hash(doc)
    if fmt == "json":
        out = {
            "version": __version__,
            "command": command,
            "config_sha256": h,
            "config": doc,
            "status": table.status,
            "columns": table.columns,
            "rows": [{c: _jsonable(r.get(c)) for c in table.columns} for r in table.rows],
        }
        return json.dumps(out, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# fracsemilinear {__version__}\n")
    buf.write(f"# command: {command}\n")
    buf.write(f"# config_sha256: {h}\n")
    buf.write(f"# status: {table.status}\n")
    buf.write(",".join(table.columns) + "\n")
    for r in table.rows:
        buf.write(",".join(_fmt(r.get(c)) for c in table.columns) + "\n")
    return buf.getvalue()


def emit(command: str, doc: dict, table: Table, out: str | None, fmt: str) -> None:
    text = render(command, doc, table, fmt)
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _model_ball(doc: dict) -> tuple[StableModel, Ball]:
    model = StableModel(float(doc["alpha"]), int(doc["dim"]))
    return model, Ball.unit(model.dim, float(doc.get("radius", 1.0)))


def _point(model: StableModel, p) -> np.ndarray:
    if len(p) != model.dim:
        raise DomainError(f"point {p} does not have {model.dim} coordinates")
    return np.asarray(p, dtype=float)


def _trace_table(trace, status: str) -> Table:
    rows = []
    if trace is not None:
        for k, d, mono, dom in trace.rows():
            rows.append({"k": k, "sup_diff": d, "monotone": mono, "dominated": dom})
    return Table(["k", "sup_diff", "monotone", "dominated"], rows, status)


def run_command(command: str, config: str | None, flags: dict, out: str | None, fmt: str,
                body) -> None:
    """Shared driver: config, execution, error mapping, output."""
    doc = None
    try:
        doc = load_config(command, config, flags)
        table = body(doc)
        emit(command, doc, table, out, fmt)
        if table.status.startswith("mismatch"):
            click.echo(f"error: {table.status}", err=True)
            sys.exit(EXIT_MISMATCH)
        return
    except CliFailure as exc:
        code, msg, table = exc.code, str(exc), exc.table
    except (ContractionError, SupersolutionBreachError) as exc:
        name = "contraction" if isinstance(exc, ContractionError) else "supersolution"
        code, msg = EXIT_DIVERGENCE, f"criterion {name} failed: {exc}"
        table = _trace_table(exc.trace, f"divergence: {name}")
    except DivergenceError as exc:
        code, msg, table = EXIT_DIVERGENCE, f"criterion numerical_finiteness failed: {exc}", None
    except NonConvergenceError as exc:
        code, msg, table = EXIT_NONCONVERGENCE, f"no convergence: {exc}", _trace_table(exc.trace, "nonconvergence")
    except (QuadratureBudgetError, LimitError, MCBiasError, SolverError) as exc:
        code, msg, table = EXIT_NONCONVERGENCE, f"no convergence: {exc}", None
    except (DomainError, PreconditionError, ValueError) as exc:
        code, msg, table = EXIT_CONFIG, f"invalid input: {exc}", None
    click.echo(f"error: {msg}", err=True)
    if table is not None and doc is not None:
        emit(command, doc, table, out, fmt)
    sys.exit(code)


def io_options(fn):
    fn = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
                      show_default=True, help="Output format.")(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False), default=None,
                      help="Output file (default: stdout).")(fn)
    fn = click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
                      help="JSON config; flags override its keys.")(fn)
    return fn


def model_options(fn):
    fn = click.option("--radius", type=float, default=None, help="Ball radius.")(fn)
    fn = click.option("--dim", type=int, default=None, help="Dimension, 2 or 3.")(fn)
    fn = click.option("--alpha", type=float, default=None, help="Stability index in (0, 2).")(fn)
    return fn


@click.group()
@click.version_option(__version__, prog_name="fracsemilinear")
def main() -> None:
    """Kernels, estimates, solvers and oracles for the fractional Laplacian on a ball."""


# ---------------------------------------------------------------------------
# kernel eval


@main.group()
def kernel() -> None:
    """Pointwise kernel values."""


@kernel.command("eval")
@model_options
@click.option("--kind", type=click.Choice(["green", "poisson", "martin", "modified_martin", "killing"]),
              default=None)
@click.option("--x", "x", type=str, default=None, help="Comma-separated first point.")
@click.option("--y", "y", type=str, default=None, help="Comma-separated second point.")
@io_options
def kernel_eval(alpha, dim, radius, kind, x, y, config, out, fmt):
    """Evaluate green, poisson, martin, modified_martin or killing at point pairs."""
    pts = None
    if x is not None:
        try:
            entry = {"x": [float(v) for v in x.split(",")]}
            if y is not None:
                entry["y"] = [float(v) for v in y.split(",")]
        except ValueError:
            raise click.BadParameter("points must be comma-separated numbers")
        pts = [entry]
    flags = {"alpha": alpha, "dim": dim, "radius": radius, "kind": kind, "points": pts}

    def body(doc):
        model, ball = _model_ball(doc)
        fn = {"green": green, "poisson": poisson, "martin": martin, "modified_martin": modified_martin}
        rows = []
        for p in doc["points"]:
            xx = _point(model, p["x"])
            if doc["kind"] == "killing":
                val, yy = killing(model, ball, xx), None
            else:
                if "y" not in p:
                    raise DomainError(f"kind {doc['kind']} needs a second point y")
                yy = _point(model, p["y"])
                val = fn[doc["kind"]](model, ball, xx, yy)
            rows.append({"kind": doc["kind"], "alpha": model.alpha, "dim": model.dim, "x": xx.tolist(),
                         "y": None if yy is None else yy.tolist(), "value": float(val)})
        return Table(["kind", "alpha", "dim", "x", "y", "value"], rows)

    run_command("kernel-eval", config, flags, out, fmt, body)


# ---------------------------------------------------------------------------
# audit


@main.command()
@model_options
@click.option("--kind", "kinds", multiple=True,
              type=click.Choice(["green", "poisson", "martin", "killing", "mdsigma", "green_profile",
                                 "poisson_profile"]), help="Estimate to audit (repeatable).")
@click.option("--delta-floor", type=float, default=None)
@click.option("--samples", type=int, default=None)
@io_options
def audit(alpha, dim, radius, kinds, delta_floor, samples, config, out, fmt):
    """Ratio of computed kernels to their two-sided estimates over a sample grid."""
    flags = {"alpha": alpha, "dim": dim, "radius": radius, "kinds": kinds, "delta_floor": delta_floor,
             "samples": samples}

    def body(doc):
        model, ball = _model_ball(doc)
        grid = GridSpec(float(doc["delta_floor"]), int(doc["samples"]))
        rows = []
        for kind in doc["kinds"]:
            rep = audit_kernel_estimate(model, ball, kind, grid)
            rows.append({"kind": kind, "alpha": model.alpha, "dim": model.dim, "delta_floor": grid.delta_floor,
                         "ratio_min": rep.ratio_min, "ratio_max": rep.ratio_max, "samples": rep.samples,
                         "passes": rep.passes})
        return Table(["kind", "alpha", "dim", "delta_floor", "ratio_min", "ratio_max", "samples", "passes"], rows)

    run_command("audit", config, flags, out, fmt, body)


# ---------------------------------------------------------------------------
# profile


@main.command()
@model_options
@click.option("--which", type=click.Choice(["green", "poisson", "regimes"]), default=None)
@click.option("--beta", "betas", type=float, multiple=True, help="Profile exponent (repeatable).")
@io_options
def profile(alpha, dim, radius, which, betas, config, out, fmt):
    """Potentials of power profiles against their explicit boundary profiles, or the Poisson regime table."""
    flags = {"alpha": alpha, "dim": dim, "radius": radius, "which": which, "betas": betas}

    def body(doc):
        model, ball = _model_ball(doc)
        R = ball.radius
        e = np.zeros(model.dim)
        e[0] = 1.0
        if doc["which"] == "regimes":
            rows = []
            for b in doc["betas"]:
                fit = poisson_regime_fit(model, ball, float(b))
                rows.append({"beta": fit.beta, "regime": fit.regime, "predicted_slope": fit.predicted_slope,
                             "slope": fit.slope, "resid_power": fit.resid_power, "resid_log": fit.resid_log})
            return Table(["beta", "regime", "predicted_slope", "slope", "resid_power", "resid_log"], rows)
        rows = []
        for b in doc["betas"]:
            b = float(b)
            prof = ProfileSpec.power(b)
            for t in doc["deltas"]:
                x = (R - float(t) * R) * e
                try:
                    if doc["which"] == "green":
                        direct = green_potential_radial(model, ball, ScalarField.delta_power_field(b), float(t) * R)
                        est = float(sum(green_profile(model, ball, prof, x)))
                    else:
                        direct = poisson_potential(model, ball, ExteriorDensity.power(b), x)
                        est = poisson_profile(model, ball, prof, x)
                    status = "finite"
                    ratio = direct / est
                except (DivergenceError, PreconditionError):
                    direct = est = ratio = math.inf
                    status = "divergent"
                rows.append({"which": doc["which"], "beta": b, "delta": float(t) * R, "direct": direct,
                             "profile": est, "ratio": ratio, "status": status})
        return Table(["which", "beta", "delta", "direct", "profile", "ratio", "status"], rows)

    run_command("profile", config, flags, out, fmt, body)


# ---------------------------------------------------------------------------
# kato


@main.command()
@model_options
@click.option("--beta", type=float, default=None, help="Exponent of q = delta^-beta.")
@io_options
def kato(alpha, dim, radius, beta, config, out, fmt):
    """Kato-class certificate for q = delta^-beta via the local mass function."""
    flags = {"alpha": alpha, "dim": dim, "radius": radius, "beta": beta}

    def body(doc):
        model, ball = _model_ball(doc)
        q = ScalarField.delta_power_field(float(doc["beta"]))
        eps = [float(v) * ball.radius for v in doc["eps"]]
        rep = kato_check(model, ball, q, eps, n_points=60)
        rows = [{"beta": float(doc["beta"]), "eps": e, "local_mass": m, "slope": rep.slope, "passes": rep.passes,
                 "divergent": rep.divergent} for e, m in rep.epsilon_profile]
        return Table(["beta", "eps", "local_mass", "slope", "passes", "divergent"], rows)

    run_command("kato", config, flags, out, fmt, body)


# ---------------------------------------------------------------------------
# criteria


def _as_list(v):
    if v is None:
        return [None]
    return list(v) if isinstance(v, list) else [v]


def _collapse(v: tuple):
    if not v:
        return None
    return v[0] if len(v) == 1 else list(v)


@main.command()
@click.option("--alpha", type=float, multiple=True, help="Stability index (repeatable for a sweep).")
@click.option("--W-beta", "w_beta", type=float, multiple=True, help="W(t) = t^-beta1 (repeatable).")
@click.option("--Lambda-p", "lambda_p", type=float, multiple=True, help="Lambda(t) = t^p (repeatable).")
@click.option("--beta2", type=float, multiple=True, help="Exterior profile t^-beta2 (repeatable).")
@click.option("--which", type=str, multiple=True, help="Criterion name (repeatable).")
@click.option("--method", type=click.Choice(["auto", "exponent", "quadrature"]), default=None)
@io_options
def criteria(alpha, w_beta, lambda_p, beta2, which, method, config, out, fmt):
    """Finite/infinite decisions of the existence criteria over a parameter sweep."""
    flags = {"alpha": _collapse(alpha), "W_beta": _collapse(w_beta), "Lambda_p": _collapse(lambda_p),
             "beta2": _collapse(beta2), "which": list(which) or None, "method": method}

    def body(doc):
        rows = []
        sweep = itertools.product(_as_list(doc["alpha"]), _as_list(doc["W_beta"]), _as_list(doc.get("Lambda_p")),
                                  _as_list(doc.get("beta2")))
        for a, b1, p, b2 in sweep:
            model = StableModel(float(a), 3)
            problem = ProblemSpec.powers(beta1=float(b1), p=None if p is None else float(p),
                                         beta2=None if b2 is None else float(b2))
            names = doc.get("which") or (
                ["boundary_decay", "integral", "U_interior"]
                + ([] if b2 is None else ["exterior_finite", "exterior_dominated", "U_exterior", "green_dominated"]))
            for name in names:
                rep = integral_criterion(model, problem, name, method=doc["method"])
                rows.append({"alpha": float(a), "W_beta": float(b1), "Lambda_p": p, "beta2": b2, "criterion": name,
                             "result": "finite" if rep.finite else "infinite", "margin": rep.exponent_margin,
                             "method": rep.method})
        verdict = "infinite" if any(r["result"] == "infinite" for r in rows) else "finite"
        click.echo(f"verdict: {verdict}", err=True)
        return Table(["alpha", "W_beta", "Lambda_p", "beta2", "criterion", "result", "margin", "method"], rows,
                     verdict)

    run_command("criteria", config, flags, out, fmt, body)


# ---------------------------------------------------------------------------
# solve


def _precheck(model: StableModel, problem: ProblemSpec, has_lambda: bool, has_ext: bool) -> None:
    names = ["boundary_decay"]
    if has_lambda and problem.has_boundary:
        names.append("integral")
    if has_ext:
        names.append("exterior_finite")
    for name in names:
        rep = integral_criterion(model, problem, name)
        if not rep.finite:
            raise CliFailure(EXIT_DIVERGENCE, f"criterion {name} failed: the data potential is infinite")


@main.command()
@model_options
@click.option("--sign", type=click.Choice(["nonnegative-f", "nonpositive-f", "general"]), default=None)
@click.option("--W-beta", "w_beta", type=float, default=None)
@click.option("--Lambda-p", "lambda_p", type=float, default=None)
@click.option("--beta2", type=float, default=None)
@click.option("--h", type=float, default=None, help="Boundary density mu = h sigma.")
@click.option("--m", type=float, default=None, help="Coupling constant.")
@click.option("--m-fraction", type=float, default=None, help="m as a fraction of the fitted bound m1.")
@click.option("--scheme", type=click.Choice(["auto", "monotone", "picard"]), default=None)
@click.option("--tol", type=float, default=None)
@click.option("--k-max", type=int, default=None)
@click.option("--grid-points", type=int, default=None)
@click.option("--trace-out", type=click.Path(dir_okay=False), default=None, help="Iteration trace file.")
@io_options
def solve(alpha, dim, radius, sign, w_beta, lambda_p, beta2, h, m, m_fraction, scheme, tol, k_max, grid_points,
          trace_out, config, out, fmt):
    """Solve the radial semilinear problem and write the nodal solution (and the iteration trace)."""
    flags = {"alpha": alpha, "dim": dim, "radius": radius, "sign": sign,
             "W": None if w_beta is None else {"type": "power", "beta": w_beta},
             "Lambda": None if lambda_p is None else {"type": "power", "p": lambda_p},
             "exterior": None if beta2 is None else {"beta2": beta2},
             "boundary": None if h is None else {"h": h}, "m": m, "m_fraction": m_fraction, "scheme": scheme,
             "tol": tol, "k_max": k_max, "grid_points": grid_points}

    def body(doc):
        if "m" in doc and "m_fraction" in doc:
            raise CliFailure(EXIT_CONFIG, "give at most one of m and m_fraction")
        model, ball, problem = ProblemSpec.from_json(doc)
        _precheck(model, problem, "Lambda" in doc and doc["Lambda"]["type"] == "power", "exterior" in doc)
        nodes = radial_grid(ball, int(doc["grid_points"]))
        if "m_fraction" in doc:
            m1 = supersolution_fit(model, ball, problem, nodes)[3]
            problem = problem.with_m(float(doc["m_fraction"]) * m1)
        scheme_ = doc["scheme"]
        if scheme_ == "auto":
            scheme_ = "monotone" if problem.sign == "nonnegative-f" else "picard"
        if scheme_ == "monotone":
            u, tr = monotone_solve(model, ball, problem, nodes, tol=float(doc["tol"]), k_max=int(doc["k_max"]))
        else:
            u, tr = picard_solve(model, ball, problem, nodes, tol=float(doc["tol"]), k_max=int(doc["k_max"]))
        if trace_out is not None:
            emit("solve", doc, _trace_table(tr, "ok"), trace_out, fmt)
        vals = u.radial(nodes)
        rows = [{"delta": float(t), "u": float(v), "m": problem.m, "scheme": scheme_, "iterations": tr.k_final}
                for t, v in zip(nodes, vals)]
        return Table(["delta", "u", "m", "scheme", "iterations"], rows)

    run_command("solve", config, flags, out, fmt, body)


# ---------------------------------------------------------------------------
# threshold scan


@main.command("threshold-scan")
@click.option("--alpha", "alphas", type=float, multiple=True, help="Stability index (repeatable).")
@click.option("--dim", type=int, default=None)
@click.option("--offset", "offsets", type=float, multiple=True, help="p - p* (repeatable).")
@io_options
def threshold_scan(alphas, dim, offsets, config, out, fmt):
    """Existence decisions for Lambda = t^p around p* = (2 + alpha) / (2 - alpha)."""
    flags = {"alphas": alphas, "dim": dim, "offsets": offsets}

    def body(doc):
        rows = []
        for a in doc["alphas"]:
            model = StableModel(float(a), int(doc["dim"]))
            ball = Ball.unit(model.dim)
            z = np.zeros(model.dim)
            z[-1] = 1.0
            p_star = (2 + model.alpha) / (2 - model.alpha)
            for off in doc["offsets"]:
                p = p_star + float(off)
                if p < 0:
                    raise DomainError(f"p = {p:g} is negative")
                problem = ProblemSpec.powers(p=p, h=1.0, sign="nonpositive-f")
                ex = integral_criterion(model, problem, "integral", method="exponent")
                qu = integral_criterion(model, problem, "integral", method="quadrature")
                diag = nonexistence_diagnostic(model, ball, problem, z)
                rows.append({"alpha": model.alpha, "p_star": p_star, "offset": float(off), "p": p,
                             "exponent": "finite" if ex.finite else "infinite",
                             "quadrature": "finite" if qu.finite else "infinite",
                             "diagnostic": diag.kind, "growth_exponent": diag.growth_exponent,
                             "agree": ex.finite == qu.finite == (not diag.divergent)})
        return Table(["alpha", "p_star", "offset", "p", "exponent", "quadrature", "diagnostic", "growth_exponent",
                      "agree"], rows)

    run_command("threshold-scan", config, flags, out, fmt, body)


# ---------------------------------------------------------------------------
# trace


def trace_field(model: StableModel, ball: Ball, name: str, beta2: float | None = None) -> ScalarField:
    """Radial fields whose boundary traces are known: M_D sigma, G_D 1 and P_D(t^-beta2)."""
    R = ball.radius
    d = model.dim
    if name == "martin_sigma":
        c = sphere_area(d) * R ** (d - model.alpha + 1)
        return ScalarField.from_delta_profile(
            lambda t: c * (np.asarray(t, dtype=float) * (2 * R - np.asarray(t, dtype=float))) ** (model.half - 1),
            meta="M_D sigma")
    if name == "green_one":
        return ScalarField.from_delta_profile(lambda t: exit_time_exact(model, ball, t), meta="G_D 1")
    if name == "poisson_power":
        if beta2 is None:
            raise DomainError("field poisson_power needs beta2")
        problem = ProblemSpec.powers(beta2=float(beta2))
        nodes = radial_grid(ball)
        vals = data_potential(model, ball, problem, nodes)
        return ScalarField.from_nodes(nodes, vals, _data_shape(model, problem), meta=f"P_D t^-{beta2}")
    raise DomainError(f"unknown field {name!r}")


@main.command()
@model_options
@click.option("--field", "field_", type=click.Choice(["martin_sigma", "green_one", "poisson_power"]), default=None)
@click.option("--beta2", type=float, default=None)
@click.option("--k", "ks", type=int, multiple=True, help="Shrink index (repeatable).")
@io_options
def trace(alpha, dim, radius, field_, beta2, ks, config, out, fmt):
    """Boundary trace masses along the exhaustion by concentric balls."""
    flags = {"alpha": alpha, "dim": dim, "radius": radius, "field": field_, "beta2": beta2, "ks": ks}

    def body(doc):
        model, ball = _model_ball(doc)
        u = trace_field(model, ball, doc["field"], doc.get("beta2"))
        sigma = sphere_area(model.dim) * ball.radius ** (model.dim - 1)
        rows = []
        for k in doc["ks"]:
            mass, mom = trace_measure(model, ball, u, int(k))
            row = {"field": doc["field"], "k": int(k), "mass": mass}
            row.update({f"moment_{i}": float(v) for i, v in enumerate(mom)})
            row.update({"sigma_mass": sigma, "relative": mass / sigma})
            rows.append(row)
        moments = [f"moment_{i}" for i in range(N_MOMENTS)]
        return Table(["field", "k", "mass", *moments, "sigma_mass", "relative"], rows)

    run_command("trace", config, flags, out, fmt, body)


# ---------------------------------------------------------------------------
# dv


def bump_field(ball: Ball, center, radius: float) -> ScalarField:
    """Bump as a field; radial when centered at the ball center."""
    bp = Bump(tuple(float(c) for c in center), float(radius))
    support = Ball(bp.center, bp.radius)
    if np.allclose(bp.center, ball.center_array, atol=0.0):
        e = np.zeros(ball.dim)
        e[0] = 1.0

        def prof(t):
            t = np.asarray(t, dtype=float)
            return bp(ball.center_array + (ball.radius - t)[..., None] * e)

        return ScalarField(radial=prof, support=support, meta="radial bump")
    return ScalarField.from_points(bp, support=support, meta="bump")


@main.command()
@model_options
@click.option("--z", type=str, default=None, help="Comma-separated boundary point.")
@io_options
def dv(alpha, dim, radius, z, config, out, fmt):
    """V-normal derivative of G_D psi at a boundary point against the modified Martin kernel integral."""
    flags = {"alpha": alpha, "dim": dim, "radius": radius,
             "z": None if z is None else [float(v) for v in z.split(",")]}

    def body(doc):
        model, ball = _model_ball(doc)
        zz = _point(model, doc["z"])
        rows = []
        for i, b in enumerate(doc["bumps"]):
            psi = bump_field(ball, _point(model, b["center"]), float(b["radius"]))
            lim = normal_derivative_dV(model, ball, psi, zz, tol=1e-8)
            ker = kernel_derivative(model, ball, psi, zz, tol=1e-8)
            rows.append({"bump": i, "z": zz.tolist(), "dv_limit": lim, "kernel_integral": ker,
                         "rel_diff": abs(lim - ker) / max(abs(ker), 1e-300)})
        return Table(["bump", "z", "dv_limit", "kernel_integral", "rel_diff"], rows)

    run_command("dv", config, flags, out, fmt, body)


# ---------------------------------------------------------------------------
# mc


@main.command()
@model_options
@click.option("--kind", type=click.Choice(["green", "poisson"]), default=None)
@click.option("--beta2", type=float, default=None)
@click.option("--point", "points", type=str, multiple=True, help="Comma-separated interior point (repeatable).")
@click.option("--samples", type=int, default=None)
@click.option("--max-steps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@io_options
def mc(alpha, dim, radius, kind, beta2, points, samples, max_steps, seed, config, out, fmt):
    """Walk-on-spheres estimates of G_D 1 or P_D(t^-beta2) against quadrature."""
    pts = [[float(v) for v in p.split(",")] for p in points] or None
    flags = {"alpha": alpha, "dim": dim, "radius": radius, "kind": kind, "beta2": beta2, "points": pts,
             "samples": samples, "max_steps": max_steps, "seed": seed}

    def body(doc):
        model, ball = _model_ball(doc)
        cfg = WoSConfig(samples=int(doc["samples"]), max_steps=int(doc["max_steps"]), seed=int(doc["seed"]))
        rows = []
        for p in doc["points"]:
            x = _point(model, p)
            if doc["kind"] == "green":
                one = ScalarField.constant(1.0)
                est = wos_green(model, ball, one, x, cfg)
                ref = green_potential(model, ball, one, x)
            else:
                g = ExteriorDensity.power(float(doc["beta2"]))
                est = wos_poisson(model, ball, g, x, cfg)
                ref = poisson_potential(model, ball, g, x)
            zscore = (est.mean - ref) / est.std_error if est.std_error > 0 else 0.0
            rows.append({"point": x.tolist(), "mean": est.mean, "std_error": est.std_error,
                         "ci_low": est.interval[0], "ci_high": est.interval[1],
                         "truncated_fraction": est.truncated_fraction, "samples": est.samples,
                         "median_steps": est.median_steps, "quadrature": ref, "z_score": zscore})
        return Table(["point", "mean", "std_error", "ci_low", "ci_high", "truncated_fraction", "samples",
                      "median_steps", "quadrature", "z_score"], rows)

    run_command("mc", config, flags, out, fmt, body)


# ---------------------------------------------------------------------------
# regress


@main.command()
@click.option("--name", "names", multiple=True, help="Restrict to these golden entries (repeatable).")
@io_options
def regress(names, config, out, fmt):
    """Recompute the golden-value suite; exit 4 on any mismatch."""
    from .regression import run

    flags = {"names": names}

    def body(doc):
        rows = run(doc.get("names"))
        bad = [r["name"] for r in rows if not r["passed"]]
        status = "ok" if not bad else "mismatch: " + ";".join(bad)
        return Table(["name", "value", "golden", "rel_err", "rtol", "passed"], rows, status)

    run_command("regress", config, flags, out, fmt, body)


if __name__ == "__main__":  # pragma: no cover
    main()
