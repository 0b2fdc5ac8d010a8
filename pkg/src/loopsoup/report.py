"""Verification reports: entries with estimate, standard error, exact target and z-score."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

import numpy as np
from scipy import stats

from .graph import FORMAT_VERSION

KINDS = ("stat", "exact", "pvalue", "discriminate")
P_MIN = 1e-3


@dataclass
class Entry:
    name: str
    kind: str
    estimate: float
    std_error: float | None
    exact: float | None
    z: float | None
    n_samples: int
    seed: int | None
    p_value: float | None = None

    def passed(self, zmax: float, exact_tol: float) -> bool:
        if self.kind == "stat":
            return self.z is not None and math.isfinite(self.z) and abs(self.z) <= zmax
        if self.kind == "discriminate":
            return self.z is not None and abs(self.z) > zmax
        if self.kind == "pvalue":
            return self.p_value is not None and self.p_value > P_MIN
        return residual(self.estimate, self.exact) <= exact_tol


def residual(value: float, target: float | None) -> float:
    """|value - target| relative to max(|target|, 1)."""
    if target is None or not math.isfinite(value):
        return math.inf
    return abs(value - target) / max(abs(target), 1.0)


def _f(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


class Report:
    def __init__(self, title: str, seed: int | None = None, zmax: float = 4.0, exact_tol: float = 1e-10):
        self.title = title
        self.seed = seed
        self.zmax = float(zmax)
        self.exact_tol = float(exact_tol)
        self.entries: list[Entry] = []

    # builders
    def add(self, e: Entry) -> Entry:
        if e.kind not in KINDS:
            raise ValueError(f"unknown entry kind {e.kind}")
        self.entries.append(e)
        return e

    def stat(self, name: str, samples, exact: float, kind: str = "stat", variance: float | None = None) -> Entry:
        """Sample mean of ``samples`` against ``exact``.

        ``variance``, when known exactly, replaces the sample variance in the standard
        error (the plug-in value is unreliable for heavy-tailed polynomial moments).
        """
        x = np.asarray(samples, dtype=float).ravel()
        n = len(x)
        est = float(x.mean()) if n else math.nan
        if variance is not None and n:
            se = math.sqrt(max(variance, 0.0) / n)
        else:
            se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        return self.add(Entry(name, kind, est, se, float(exact), _z(est, exact, se), n, self.seed))

    def estimate(self, name: str, est: float, se: float, exact: float, n: int, kind: str = "stat") -> Entry:
        return self.add(Entry(name, kind, float(est), float(se), float(exact), _z(est, exact, se), int(n), self.seed))

    def compare(self, name: str, a, b) -> Entry:
        """Two independent samples with equal means (exact = 0 for the difference)."""
        a, b = np.asarray(a, float).ravel(), np.asarray(b, float).ravel()
        est = a.mean() - b.mean()
        se = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
        return self.add(Entry(name, "stat", float(est), se, 0.0, _z(est, 0.0, se), len(a) + len(b), self.seed))

    def exact(self, name: str, value: float, target: float) -> Entry:
        return self.add(Entry(name, "exact", float(value), None, float(target), None, 0, None))

    def pvalue(self, name: str, statistic: float, p: float, n: int) -> Entry:
        return self.add(Entry(name, "pvalue", float(statistic), None, None, None, int(n), self.seed, float(p)))

    def chisquare(self, name: str, observed, probs, ddof: int = 0) -> Entry:
        """Chi-square goodness of fit; bins with expected count < 5 are pooled into their neighbour."""
        obs, exp_ = _pool(np.asarray(observed, float), np.asarray(probs, float) * np.sum(observed))
        if len(obs) < 2:
            return self.pvalue(name, 0.0, 1.0, int(np.sum(observed)))
        exp_ = exp_ * obs.sum() / exp_.sum()
        res = stats.chisquare(obs, exp_, ddof=ddof)
        return self.pvalue(name, res.statistic, res.pvalue, int(obs.sum()))

    def homogeneity(self, name: str, counts_a, counts_b) -> Entry:
        table = np.array([counts_a, counts_b], dtype=float)
        table = table[:, table.sum(axis=0) > 0]
        if table.shape[1] < 2:
            return self.pvalue(name, 0.0, 1.0, int(table.sum()))
        res = stats.chi2_contingency(table, correction=False)
        return self.pvalue(name, res.statistic, res.pvalue, int(table.sum()))

    def ks(self, name: str, a, b) -> Entry:
        res = stats.ks_2samp(np.asarray(a).ravel(), np.asarray(b).ravel())
        return self.pvalue(name, res.statistic, res.pvalue, len(a) + len(b))

    def extend(self, other: "Report") -> None:
        self.entries.extend(other.entries)

    # verdict and output
    def failures(self) -> list[Entry]:
        return [e for e in self.entries if not e.passed(self.zmax, self.exact_tol)]

    @property
    def verdict(self) -> str:
        return "pass" if not self.failures() else "fail"

    def to_dict(self) -> dict:
        entries = []
        for e in self.entries:
            d = {k: _f(v) if isinstance(v, float) else v for k, v in asdict(e).items()}
            d["passed"] = e.passed(self.zmax, self.exact_tol)
            entries.append(d)
        return {
            "format_version": FORMAT_VERSION,
            "title": self.title,
            "seed": self.seed,
            "thresholds": {"z_max": self.zmax, "exact_tol": self.exact_tol, "p_min": P_MIN},
            "verdict": self.verdict,
            "entries": entries,
        }

    def payload_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [f"{self.title}: {self.verdict.upper()}"]
        w = max([len(e.name) for e in self.entries] + [4])
        rows.append(f"{'name':<{w}}  {'kind':<12} {'estimate':>14} {'exact':>14} {'se':>10} {'z/p':>10}  ok")
        for e in self.entries:
            ex = "" if e.exact is None else f"{e.exact:14.8g}"
            se = "" if e.std_error is None else f"{e.std_error:10.3g}"
            if e.kind == "pvalue":
                zp = f"p={e.p_value:.3g}"
            elif e.kind == "exact":
                zp = f"r={residual(e.estimate, e.exact):.1e}"
            else:
                zp = "" if e.z is None else f"{e.z:10.2f}"
            ok = "ok" if e.passed(self.zmax, self.exact_tol) else "FAIL"
            rows.append(f"{e.name:<{w}}  {e.kind:<12} {e.estimate:14.8g} {ex:>14} {se:>10} {zp:>10}  {ok}")
        return "\n".join(rows)


def _z(est, exact, se) -> float | None:
    if se is None or not math.isfinite(se):
        return math.nan
    if se == 0:
        return 0.0 if est == exact else math.inf
    return float((est - exact) / se)


def _pool(obs: np.ndarray, exp_: np.ndarray, min_expected: float = 5.0):
    obs, exp_ = list(obs), list(exp_)
    i = 0
    while i < len(exp_) and len(exp_) > 1:
        if exp_[i] < min_expected:
            j = i + 1 if i + 1 < len(exp_) else i - 1
            exp_[j] += exp_[i]
            obs[j] += obs[i]
            del exp_[i], obs[i]
            i = min(i, j)
        else:
            i += 1
    return np.array(obs), np.array(exp_)


def write_report(report: Report, path: str | None = None) -> str:
    """Serialize with a header holding the timestamp; the payload is reproducible."""
    doc = {
        "header": {"format_version": FORMAT_VERSION, "created": datetime.now(timezone.utc).isoformat()},
        "report": report.to_dict(),
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text
