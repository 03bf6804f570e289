"""Routing between the polynomial fitter and an external fallback solver.

A fitted equation whose exponents all sit within a snap tolerance of
integers is accepted as a Laurent polynomial; anything else is handed to a
user-supplied command-line solver (if configured) that reads the dataset
from a CSV path and prints one equation string to stdout.
"""
from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .poly import LaurentPolynomial, LaurentTerm, canonicalize

__all__ = [
    "LpVerdict",
    "SecondaryAdapter",
    "SecondaryResult",
    "EnsembleReport",
    "classify_lp",
    "snap_integer_exponents",
    "run_ensemble",
]


@dataclass(frozen=True)
class LpVerdict:
    """Integer-exponent test result; offenders are (term, variable, value)."""

    is_lp: bool
    offending_exponents: tuple[tuple[int, int, float], ...]


@dataclass(frozen=True)
class SecondaryAdapter:
    """External solver invocation: ``command_template`` is a shell command
    containing the placeholder {input} exactly once, replaced by the quoted
    path of the dataset CSV. The command must print one equation string to
    stdout and exit 0."""

    command_template: str
    timeout: float = 600.0
    working_dir: str | None = None

    def __post_init__(self) -> None:
        if self.command_template.count("{input}") != 1:
            raise ValueError("command_template must contain {input} exactly once")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class SecondaryResult:
    """Outcome of one adapter invocation."""

    equation: str | None
    returncode: int | None
    stderr: str
    error: str | None = None


@dataclass(frozen=True)
class EnsembleReport:
    """Final routing outcome. ``source`` is "primary" when the polynomial
    fit was accepted, "secondary" when the fallback solver supplied the
    equation, "rejected" when the fit is non-LP and no fallback exists, and
    "error" when the fallback was tried but failed."""

    final_equation: str | None
    source: str
    verdict: LpVerdict
    fit_report: object
    primary_equation: str
    secondary: SecondaryResult | None = None


# Absolute slack under the tolerance comparison: |(-0.999) - (-1)| evaluates
# to 0.0010000000000000009 in binary floats, one ulp past a literal 0.001
# tolerance, yet -0.999 sits exactly one rounding-grid step from the integer
# and must count as within tolerance.
_TOL_EPS = 1e-12


def _near_integer(e: float, tol: float) -> bool:
    return abs(e - round(e)) <= tol + _TOL_EPS


def classify_lp(eq: LaurentPolynomial, integer_snap_tol: float = 0.001) -> LpVerdict:
    """An equation is a Laurent polynomial iff every exponent lies within
    integer_snap_tol of an integer. The empty polynomial passes vacuously."""
    offending = []
    for ti, term in enumerate(eq.terms):
        for vi, e in enumerate(term.exponents):
            if not _near_integer(e, integer_snap_tol):
                offending.append((ti, vi, e))
    return LpVerdict(is_lp=not offending, offending_exponents=tuple(offending))


def snap_integer_exponents(eq: LaurentPolynomial, integer_snap_tol: float = 0.001) -> LaurentPolynomial:
    """Replace every exponent within tolerance of an integer by that integer
    (re-canonicalized, since snapping can merge terms). Out-of-tolerance
    exponents are left untouched."""
    terms = tuple(
        LaurentTerm(
            term.coefficient,
            tuple(
                float(round(e)) if _near_integer(e, integer_snap_tol) else e
                for e in term.exponents
            ),
        )
        for term in eq.terms
    )
    return canonicalize(LaurentPolynomial(eq.nvars, terms))


def _invoke_secondary(adapter: SecondaryAdapter, csv_path: str) -> SecondaryResult:
    command = adapter.command_template.replace("{input}", shlex.quote(csv_path))
    try:
        proc = subprocess.run(
            command,
            shell=True,
            capture_output=True,
            text=True,
            timeout=adapter.timeout,
            cwd=adapter.working_dir,
        )
    except subprocess.TimeoutExpired:
        return SecondaryResult(equation=None, returncode=None, stderr="",
                               error=f"secondary solver timed out after {adapter.timeout}s")
    if proc.returncode != 0:
        return SecondaryResult(equation=None, returncode=proc.returncode,
                               stderr=proc.stderr,
                               error=f"secondary solver exited with status {proc.returncode}")
    first_line = proc.stdout.splitlines()[0].strip() if proc.stdout.splitlines() else ""
    if not first_line:
        return SecondaryResult(equation=None, returncode=0, stderr=proc.stderr,
                               error="secondary solver printed no equation")
    return SecondaryResult(equation=first_line, returncode=0, stderr=proc.stderr)


def run_ensemble(dataset, config=None, adapter: SecondaryAdapter | None = None,
                 record_timings: bool = False) -> EnsembleReport:
    """Fit the polynomial network, accept its equation when the LP verdict
    holds, otherwise delegate to the adapter (when present). The fitted
    intermediate is always preserved in the report."""
    from .poly import print_equation
    from .train import fit

    report = fit(dataset, config, record_timings=record_timings)
    tol = report.config_echo.integer_snap_tol
    verdict = classify_lp(report.best.equation, tol)
    if verdict.is_lp and report.error is None:
        eq_str = print_equation(snap_integer_exponents(report.best.equation, tol))
        return EnsembleReport(
            final_equation=eq_str,
            source="primary",
            verdict=verdict,
            fit_report=report,
            primary_equation=eq_str,
        )
    primary_str = print_equation(report.best.equation)
    if adapter is None:
        return EnsembleReport(
            final_equation=None,
            source="rejected",
            verdict=verdict,
            fit_report=report,
            primary_equation=primary_str,
        )
    with tempfile.TemporaryDirectory(prefix="lpgrow-ensemble-") as tmp:
        from .data import save_csv

        csv_path = Path(tmp) / "dataset.csv"
        save_csv(dataset, csv_path)
        result = _invoke_secondary(adapter, str(csv_path))
    if result.error is not None:
        return EnsembleReport(
            final_equation=None,
            source="error",
            verdict=verdict,
            fit_report=report,
            primary_equation=primary_str,
            secondary=result,
        )
    return EnsembleReport(
        final_equation=result.equation,
        source="secondary",
        verdict=verdict,
        fit_report=report,
        primary_equation=primary_str,
        secondary=result,
    )
