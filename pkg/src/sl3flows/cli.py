"""Command-line front end.

Binds INI-style config files to the experiment modules and writes
machine-readable CSV/JSON results.  Output is deterministic: identical
config and seed produce byte-identical files (17 significant digits, no
timestamps, sorted metadata).

Exit codes: 0 success, 1 config/validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys

import numpy as np

from .conjugacy_lab import (
    conjugacy_residual,
    kakutani_invariant,
    lambda_transfer_diagnostic,
    telescoping_residual,
)
from .fields import (
    FieldSyntaxError,
    PerturbationData,
    TransferDomainError,
    condition_check,
    from_transfer,
    parse_field,
)
from .flow_engine import (
    DeterminantDriftError,
    FlowSpec,
    IntegratorConfig,
    PerturbationConditionError,
    TimeChangeSignError,
)
from .lie_core import (
    BASIS_NAMES,
    DIM,
    AlgebraElement,
    STRUCTURE,
    adjoint_matrix,
    frame_element,
    unipotent,
)
from .pushforward import (
    differential_matrix,
    dyadic_times,
    integrate_pushforward,
    timechange_differential,
)
from .sampling import sample_points
from .shear_lab import shear_curve, shear_diagnostics

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

COMMANDS = (
    "bracket-table",
    "adjoint",
    "pushforward",
    "parabolicity",
    "shear",
    "conjugacy",
    "kakutani",
    "timechange-diff",
    "validate",
)


class CliConfigError(ValueError):
    pass


@dataclasses.dataclass
class ExperimentConfig:
    # perturbation
    u_coeffs: tuple = (1.0, 0.0, 0.0)
    w_expression: str | None = "0.05*sin(m12+m13)"
    beta_expression: str | None = None
    lambda_expression: str | None = None
    # integrator
    method: str = "lie-rk4"
    step: float = 5e-3
    tolerance: float = 1e-9
    # sampling
    box: float = 0.4
    count: int = 200
    seed: int = 1789
    # experiment
    t: float = 1.0
    t_max: float = 32.0
    sigma: float = 1.0
    s_samples: int = 9
    t_values: tuple = (1.0, 2.0, 4.0, 8.0)
    base_count: int = 3
    base_seed: int = 11
    field_name: str = "E13"
    # output
    out: str | None = None
    format: str = "csv"

    @classmethod
    def from_ini(cls, path: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise CliConfigError(f"cannot read config file {path!r}")
        cfg = cls()

        def get(section, key, cast, default):
            if parser.has_option(section, key):
                raw = _strip_quotes(parser.get(section, key))
                try:
                    return cast(raw)
                except (TypeError, ValueError) as exc:
                    raise CliConfigError(f"[{section}] {key}: {exc}")
            return default

        cfg.u_coeffs = get("perturbation", "u_coeffs", _floats, cfg.u_coeffs)
        cfg.w_expression = get("perturbation", "w_expression", str, None)
        cfg.beta_expression = get("perturbation", "beta_expression", str, None)
        cfg.lambda_expression = get("perturbation", "lambda_expression", str, None)
        cfg.method = get("integrator", "method", str, cfg.method)
        cfg.step = get("integrator", "step", float, cfg.step)
        cfg.tolerance = get("integrator", "tolerance", float, cfg.tolerance)
        cfg.box = get("sampling", "box", float, cfg.box)
        cfg.count = get("sampling", "count", int, cfg.count)
        cfg.seed = get("sampling", "seed", int, cfg.seed)
        cfg.t = get("experiment", "t", float, cfg.t)
        cfg.t_max = get("experiment", "t_max", float, cfg.t_max)
        cfg.sigma = get("experiment", "sigma", float, cfg.sigma)
        cfg.s_samples = get("experiment", "s_samples", int, cfg.s_samples)
        cfg.t_values = get("experiment", "t_values", _floats, cfg.t_values)
        cfg.base_count = get("experiment", "base_count", int, cfg.base_count)
        cfg.base_seed = get("experiment", "base_seed", int, cfg.base_seed)
        cfg.field_name = get("experiment", "field", str, cfg.field_name)
        cfg.out = get("output", "path", str, None)
        cfg.format = get("output", "format", str, cfg.format)
        return cfg

    def validation_errors(self) -> list[str]:
        errors = []
        if len(self.u_coeffs) != 3:
            errors.append("perturbation.u_coeffs: expected three numbers c12 c23 c13")
        else:
            c12, c23, _ = self.u_coeffs
            if c12 * c12 + c23 * c23 <= 0.0:
                errors.append(
                    "perturbation.u_coeffs: c12 and c23 are both zero; that direction "
                    "only time-changes the central flow and is excluded"
                )
        has_w = self.w_expression is not None
        has_direct = self.beta_expression is not None or self.lambda_expression is not None
        if has_w and has_direct:
            errors.append(
                "perturbation: give either w_expression or beta/lambda expressions, not both"
            )
        if not has_w:
            if self.beta_expression is None or self.lambda_expression is None:
                errors.append(
                    "perturbation: need w_expression, or both beta_expression and "
                    "lambda_expression"
                )
        for label, expr in (
            ("w_expression", self.w_expression),
            ("beta_expression", self.beta_expression),
            ("lambda_expression", self.lambda_expression),
        ):
            if expr is not None:
                try:
                    parse_field(expr)
                except FieldSyntaxError as exc:
                    errors.append(f"perturbation.{label}: {exc}")
        if self.method not in ("lie-rk4", "rk4-monitor"):
            errors.append(f"integrator.method: unknown method {self.method!r}")
        if not self.step > 0:
            errors.append("integrator.step: must be positive")
        if not self.tolerance > 0:
            errors.append("integrator.tolerance: must be positive")
        if self.format not in ("csv", "json"):
            errors.append(f"output.format: expected csv or json, got {self.format!r}")
        if self.out is None:
            errors.append("output.path: missing (set it in the config or pass --out)")
        return errors

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(method=self.method, step=self.step, tolerance=self.tolerance)

    def samples(self):
        return sample_points(self.count, box=self.box, seed=self.seed)

    def base_points(self, n=None):
        return sample_points(n or self.base_count, box=self.box, seed=self.base_seed)

    def resolved(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = " ".join(_fmt(x) for x in v)
            out[f.name] = v
        return out


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def _strip_quotes(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"":
        return s[1:-1]
    return s


def _floats(s) -> tuple:
    if isinstance(s, tuple):
        return s
    return tuple(float(x) for x in str(s).replace(",", " ").split())


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: str, metadata: dict, header: list, rows: list):
    lines = [f"# {k} = {metadata[k]}" for k in sorted(metadata)]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(cfg: ExperimentConfig, metadata: dict, header: list, rows: list, summary: dict):
    """Write the experiment result in the configured format."""
    meta = dict(metadata)
    meta.update({f"summary.{k}": _fmt(v) if isinstance(v, float) else v
                 for k, v in summary.items()
                 if isinstance(v, (int, float, str, bool))})
    if cfg.format == "csv":
        _write_csv(cfg.out, meta, header, rows)
    else:
        payload = {
            "config": {k: str(v) for k, v in metadata.items()},
            "summary": summary,
            "columns": header,
            "rows": [[x for x in row] for row in rows],
        }
        _write_json(cfg.out, payload)


def build_perturbation(cfg: ExperimentConfig) -> PerturbationData:
    c12, c23, c13 = cfg.u_coeffs
    U = unipotent(c12, c23, c13)
    if cfg.w_expression is not None:
        w = parse_field(cfg.w_expression)
        return from_transfer(w, U, samples=cfg.samples())
    beta = parse_field(cfg.beta_expression)
    lam = parse_field(cfg.lambda_expression)
    return PerturbationData(beta, lam, U)


def _algebra_combo(coords) -> str:
    terms = []
    for name, c in zip(BASIS_NAMES, coords):
        c = float(c)
        if c == 0.0:
            continue
        if c == 1.0:
            terms.append(f"+{name}")
        elif c == -1.0:
            terms.append(f"-{name}")
        else:
            terms.append(f"{c:+g}*{name}")
    if not terms:
        return "0"
    joined = "".join(terms)
    return joined[1:] if joined.startswith("+") else joined


def _field_by_name(name: str) -> AlgebraElement:
    name = name.strip()
    if name == "Z":
        return frame_element("E13")
    if name in BASIS_NAMES:
        return frame_element(name)
    try:
        coords = _floats(name)
    except ValueError:
        raise CliConfigError(f"unknown field {name!r}: use a frame name or 8 coordinates")
    if len(coords) != DIM:
        raise CliConfigError(f"field coordinates need {DIM} entries, got {len(coords)}")
    return AlgebraElement.from_coords(coords)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_bracket_table(cfg: ExperimentConfig, meta: dict) -> int:
    table = STRUCTURE.as_array()
    header = ["bracket"] + list(BASIS_NAMES)
    rows = []
    for i, name in enumerate(BASIS_NAMES):
        rows.append([name] + [_algebra_combo(table[i][j]) for j in range(DIM)])
    _emit(cfg, meta, header, rows, {"dimension": DIM})
    return EXIT_OK


def _cmd_adjoint(cfg: ExperimentConfig, meta: dict) -> int:
    v = _field_by_name(cfg.field_name)
    m = adjoint_matrix(v, cfg.t)
    header = ["row"] + list(BASIS_NAMES)
    rows = [[BASIS_NAMES[i]] + [float(x) for x in m[i]] for i in range(DIM)]
    _emit(cfg, meta, header, rows, {"field": cfg.field_name, "t": cfg.t})
    return EXIT_OK


def _cmd_pushforward(cfg: ExperimentConfig, meta: dict) -> int:
    P = build_perturbation(cfg)
    spec = FlowSpec.perturbed(P, cfg.integrator(), samples=cfg.samples())
    g = cfg.base_points(1)[0]
    fc = integrate_pushforward(spec, P.W, cfg.t_max, g, n_records=32)
    norms = np.linalg.norm(fc.coeffs, axis=1)
    header = ["t"] + [f"a_{n}" for n in BASIS_NAMES] + ["norm"]
    rows = [[float(t)] + [float(x) for x in row] + [float(nn)]
            for t, row, nn in zip(fc.times, fc.coeffs, norms)]
    from .pushforward import growth_exponent

    mask = fc.times > 0
    exponent = growth_exponent(fc.times[mask], norms[mask])
    _emit(cfg, meta, header, rows, {"fitted_exponent": exponent})
    return EXIT_OK


def _cmd_parabolicity(cfg: ExperimentConfig, meta: dict) -> int:
    P = build_perturbation(cfg)
    spec = FlowSpec.perturbed(P, cfg.integrator(), samples=cfg.samples())
    g = cfg.base_points(1)[0]
    times = dyadic_times(cfg.t_max)
    series = differential_matrix(spec, float(times[-1]), g, record_times=times)
    mask = series.times > 0
    norms = series.norms()
    rows = [[float(t)] + [float(x) for x in rn] + [float(nn)]
            for t, rn, nn in zip(series.times[mask], series.row_norms()[mask], norms[mask])]
    header = ["t"] + [f"row_{n}" for n in BASIS_NAMES] + ["norm"]
    summary = {
        "fitted_exponent": series.fit_exponent(),
        "row_exponents": [float(x) for x in series.fit_row_exponents()],
        "max_det_drift": float(np.max(np.abs([p.det_drift() for p in series.points]))),
    }
    _emit(cfg, meta, header, rows, summary)
    return EXIT_OK


def _cmd_shear(cfg: ExperimentConfig, meta: dict) -> int:
    P = build_perturbation(cfg)
    g = cfg.base_points(1)[0]
    config = cfg.integrator()
    diag = shear_diagnostics(P, cfg.t_values, cfg.sigma, g, cfg.samples(), config,
                             n_samples=cfg.s_samples)
    rows = []
    for t in cfg.t_values:
        curve = shear_curve(P, t, cfg.sigma, g, cfg.s_samples, config)
        for s, pt in zip(curve.s_values, curve.points):
            rows.append([float(t), float(s)] + [float(x) for x in pt.matrix.ravel()])
    header = ["t", "s"] + [f"m{r}{c}" for r in (1, 2, 3) for c in (1, 2, 3)]
    _emit(cfg, meta, header, rows, diag.as_dict())
    return EXIT_OK


def _cmd_conjugacy(cfg: ExperimentConfig, meta: dict) -> int:
    if cfg.w_expression is None:
        raise CliConfigError("conjugacy requires a w_expression perturbation")
    P = build_perturbation(cfg)
    w = parse_field(cfg.w_expression)
    config = cfg.integrator()
    t_grid = sorted({float(s) * v for v in cfg.t_values for s in (-1.0, 1.0)})
    rows = []
    worst = 0.0
    for gi, g in enumerate(cfg.base_points()):
        for t in t_grid:
            r = conjugacy_residual(w, P, t, g, config)
            worst = max(worst, r)
            rows.append([gi, float(t), float(r)])
    summary = {"max_residual": worst, "threshold": 1e-6, "passed": bool(worst <= 1e-6)}
    _emit(cfg, meta, ["base_index", "t", "residual"], rows, summary)
    return EXIT_OK


def _cmd_kakutani(cfg: ExperimentConfig, meta: dict) -> int:
    v = _field_by_name(cfg.field_name)
    result = kakutani_invariant(v)
    rows = [[cfg.field_name, float(result.value),
             " ".join(str(b) for b in result.blocks), result.flag or "anchored"]]
    _emit(cfg, meta, ["field", "value", "blocks", "flag"], rows, result.as_dict())
    return EXIT_OK


def _cmd_timechange_diff(cfg: ExperimentConfig, meta: dict) -> int:
    P = build_perturbation(cfg)
    g = cfg.base_points(1)[0]
    td = timechange_differential(P.lam, cfg.t_max, g, cfg.integrator(), n_records=16)
    rows = []
    for t, m, lam in zip(td.times, td.matrices, td.lambdas):
        rows.append([
            float(t), float(lam),
            float(m[3, 0]), float(m[4, 0]), float(m[5, 2]), float(m[6, 1]),
            float(abs(m[3, 0] + 2 * lam)), float(abs(m[5, 2] + lam)),
            float(abs(m[6, 1] - lam)),
        ])
    header = ["t", "Lambda", "entry_41", "entry_51", "entry_63", "entry_72",
              "resid_41", "resid_63", "resid_72"]
    summary = {"structure_residual": td.structure_residual()}
    _emit(cfg, meta, header, rows, summary)
    return EXIT_OK


def _cmd_validate(cfg: ExperimentConfig, meta: dict) -> int:
    errors = cfg.validation_errors()
    # output path is not required just to validate
    errors = [e for e in errors if not e.startswith("output.path")]
    lines = []
    status = EXIT_OK
    if errors:
        status = EXIT_CONFIG
        lines.extend(f"FAIL {e}" for e in errors)
    else:
        lines.append("ok config fields")
        try:
            P = build_perturbation(cfg)
            report = condition_check(P, cfg.samples())
            lines.append(
                f"{'ok' if report.passed else 'FAIL'} shear condition: "
                f"max|W beta| = {report.max_w_beta:.6g} vs |c| = {abs(report.c):.6g}, "
                f"lambda in [{report.lam_min:.6g}, {report.lam_max:.6g}]"
            )
            if not report.passed:
                status = EXIT_CONFIG
        except (TransferDomainError, FieldSyntaxError, CliConfigError) as exc:
            lines.append(f"FAIL perturbation: {exc}")
            status = EXIT_CONFIG
    print("\n".join(lines))
    if cfg.out is not None:
        with open(cfg.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return status


_DISPATCH = {
    "bracket-table": _cmd_bracket_table,
    "adjoint": _cmd_adjoint,
    "pushforward": _cmd_pushforward,
    "parabolicity": _cmd_parabolicity,
    "shear": _cmd_shear,
    "conjugacy": _cmd_conjugacy,
    "kakutani": _cmd_kakutani,
    "timechange-diff": _cmd_timechange_diff,
    "validate": _cmd_validate,
}


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sl3flows",
        description="Experiments with perturbed unipotent flows on SL(3,R)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config file (defaults used when omitted)")
        p.add_argument("--out", help="output file path")
        p.add_argument("--seed", type=int, help="override the sampling seed")
        p.add_argument("--format", choices=("csv", "json"), help="output format")
        p.add_argument("--t", type=float, help="override the experiment time t")
        p.add_argument("--sigma", type=float, help="override the curve length sigma")
        p.add_argument("--tmax", type=float, help="override the experiment horizon t_max")
        p.add_argument("--field", help="frame field name or 8 coordinates")
    return parser


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_ini(args.config) if args.config else default_config()
        if args.out is not None:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.format is not None:
            cfg.format = args.format
        if args.t is not None:
            cfg.t = args.t
        if args.sigma is not None:
            cfg.sigma = args.sigma
        if args.tmax is not None:
            cfg.t_max = args.tmax
        if args.field is not None:
            cfg.field_name = args.field

        if args.command != "validate":
            errors = cfg.validation_errors()
            if errors:
                for e in errors:
                    print(f"config error: {e}", file=sys.stderr)
                return EXIT_CONFIG

        meta = {f"config.{k}": v for k, v in cfg.resolved().items()}
        meta["command"] = args.command
        return _DISPATCH[args.command](cfg, meta)
    except (CliConfigError, FieldSyntaxError, TransferDomainError,
            PerturbationConditionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DeterminantDriftError, TimeChangeSignError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
