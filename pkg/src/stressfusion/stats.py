"""Two-sample t-test and one-way ANOVA on top of a continued-fraction
incomplete beta function."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data_model import BANDS, EEG_CHANNELS, Scheme, label_scores
from .errors import ConfigError
from .preprocess import SgConfig, StftConfig, band_powers, savitzky_golay

_EPS = 4e-16
_TINY = 1e-300
_MAX_TERMS = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_TERMS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ConfigError("betainc requires a, b > 0")
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc(df / 2.0, 0.5, df / (df + t * t)))


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_sf_two_sided(t, df)
    return 1.0 - tail if t >= 0 else tail


def f_sf(f: float, d1: float, d2: float) -> float:
    """Upper tail ``P(F >= f)`` of the F distribution."""
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))


def f_cdf(f: float, d1: float, d2: float) -> float:
    return 1.0 - f_sf(f, d1, d2)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    dof: tuple[float, ...]
    group_means: tuple[float, ...]
    degenerate: bool = False

    __test__ = False  # keep pytest from collecting this class

    @property
    def significant(self) -> bool:
        return self.p_value < 0.05


def _groups(groups) -> list[np.ndarray]:
    out = [np.asarray(g, dtype=float) for g in groups]
    for g in out:
        if g.size < 2:
            raise ConfigError("each group needs at least two observations")
    return out


def t_test_two_sample(a: Sequence[float], b: Sequence[float], welch: bool = False) -> TestResult:
    """Two-sided two-sample t-test (pooled variance unless ``welch``)."""
    a, b = _groups([a, b])
    na, nb = a.size, b.size
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    diff = ma - mb
    if welch:
        se2 = va / na + vb / nb
        df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)) if se2 > 0 else na + nb - 2.0
    else:
        df = na + nb - 2.0
        se2 = ((na - 1) * va + (nb - 1) * vb) / df * (1.0 / na + 1.0 / nb)
    means = (float(ma), float(mb))
    if se2 == 0:
        if diff == 0:
            return TestResult(0.0, 1.0, (df,), means)
        return TestResult(math.copysign(math.inf, diff), 0.0, (df,), means, degenerate=True)
    t = diff / math.sqrt(se2)
    return TestResult(float(t), t_sf_two_sided(t, df), (float(df),), means)


def anova_oneway(groups: Sequence[Sequence[float]]) -> TestResult:
    """One-way ANOVA F test with ``(k - 1, N - k)`` degrees of freedom."""
    gs = _groups(groups)
    if len(gs) < 2:
        raise ConfigError("ANOVA needs at least two groups")
    k = len(gs)
    n = sum(g.size for g in gs)
    grand = np.concatenate(gs).mean()
    ss_between = sum(g.size * (g.mean() - grand) ** 2 for g in gs)
    ss_within = sum(np.sum((g - g.mean()) ** 2) for g in gs)
    d1, d2 = k - 1.0, n - float(k)
    means = tuple(float(g.mean()) for g in gs)
    if ss_within == 0:
        if ss_between == 0:
            return TestResult(0.0, 1.0, (d1, d2), means)
        return TestResult(math.inf, 0.0, (d1, d2), means, degenerate=True)
    f = (ss_between / d1) / (ss_within / d2)
    return TestResult(float(f), f_sf(f, d1, d2), (d1, d2), means)


@dataclass(frozen=True)
class MeasureTable:
    """Raw per-subject measures used for significance testing."""

    subject_ids: tuple[str, ...]
    names: tuple[str, ...]
    values: np.ndarray
    pss_scores: tuple[int, ...]


def raw_measures(records, stft=None, sg=None) -> MeasureTable:
    """Mean band power per channel/band, mean GSR resistance and mean PPG."""
    stft = stft or StftConfig()
    sg = sg or SgConfig()
    names = [f"power:{b.short}:{c}" for c in EEG_CHANNELS for b in BANDS]
    names += ["GSR:mean_resistance", "PPG:mean"]
    rows = []
    for r in records:
        mp = band_powers(r.eeg, stft).mean_power()
        row = [mp[ci, bi] for ci in range(len(EEG_CHANNELS)) for bi in range(len(BANDS))]
        row += [savitzky_golay(r.gsr, sg).samples.mean(), savitzky_golay(r.ppg, sg).samples.mean()]
        rows.append(row)
    return MeasureTable(tuple(r.subject_id for r in records), tuple(names), np.array(rows),
                        tuple(r.pss_score for r in records))


@dataclass(frozen=True)
class SignificanceRow:
    measure: str
    scheme: Scheme
    result: TestResult


@dataclass
class SignificanceReport:
    rows: list[SignificanceRow] = field(default_factory=list)

    def for_scheme(self, scheme: Scheme) -> list[SignificanceRow]:
        return [r for r in self.rows if r.scheme is scheme]

    def to_text(self) -> str:
        lines = [f"{'scheme':<6} {'measure':<22} {'test':<5} {'stat':>10} {'p':>10}  sig"]
        for r in self.rows:
            test = "t" if r.scheme is Scheme.TWO else "F"
            lines.append(f"{r.scheme.value:<6} {r.measure:<22} {test:<5} "
                         f"{r.result.statistic:>10.4f} {r.result.p_value:>10.4g}  "
                         f"{'*' if r.result.significant else ''}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["scheme", "measure", "statistic", "p_value", "dof", "group_means", "significant"])
            for r in self.rows:
                w.writerow([r.scheme.value, r.measure, repr(r.result.statistic), repr(r.result.p_value),
                            " ".join(repr(d) for d in r.result.dof),
                            " ".join(repr(m) for m in r.result.group_means), int(r.result.significant)])


def significance_report(measures: MeasureTable, schemes=(Scheme.TWO, Scheme.THREE),
                        mean=None, sd=None) -> SignificanceReport:
    """t-test (two classes) or ANOVA (three classes) for every measure.

    Rows of each scheme are sorted by ascending p-value, ties by measure order.
    """
    report = SignificanceReport()
    for scheme in schemes:
        labels = np.array([lab.index for lab in label_scores(measures.pss_scores, scheme, mean, sd)])
        rows = []
        for j, name in enumerate(measures.names):
            col = measures.values[:, j]
            groups = [col[labels == c] for c in range(scheme.n_classes)]
            if scheme is Scheme.TWO:
                res = t_test_two_sample(groups[0], groups[1])
            else:
                res = anova_oneway(groups)
            rows.append((res.p_value, j, SignificanceRow(name, scheme, res)))
        rows.sort(key=lambda t: (t[0], t[1]))
        report.rows.extend(r for _, _, r in rows)
    return report
