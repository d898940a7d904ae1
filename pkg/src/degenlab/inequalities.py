"""Randomized verification of the algebraic inequalities behind the flux model.

Checked with their explicit constants, at relative slack ``SLACK_REL`` against
the scale of both sides:

(a) unit-vector bound            |xi/|xi| - eta/|eta||  <=  (2/|eta|) |xi - eta|
(b) monotonicity, 4/p^2          <H_{p-1}(xi)-H_{p-1}(eta), xi-eta>
                                     >= (4/p^2) |H_{p/2}(xi)-H_{p/2}(eta)|^2
(c) monotonicity, 1/2^{p+1}      for |eta| > lam, the same inner product
                                     >= (|eta|-lam)^p |xi-eta|^2
                                        / (2^{p+1} |eta| (|xi|+|eta|))
(d) V against H, C_p             |V(xi)-V(eta)|^2 <= C_p <...>  with
                                     C_p = 2 + 2^{p+7}/p^2
(e) Lind-type ratio (recorded, not asserted: the reference states no explicit
    constant): |xi-eta|^p / | |xi|^{(p-2)/2} xi - |eta|^{(p-2)/2} eta |^2
    for p > 2, lam = 0
(f) profile upper bound          g(t) <= (2/p) t^{p/2} (t/(t+lam))^{(1+2a)/2}
(g) weight absorption            phi'(t) t <= 2 a phi(t)

A margin is RHS - LHS arranged so that non-negative means the inequality
holds; not-applicable cases are reported as NaN, never as violations.
Campaign sampling is log-uniform in magnitude, uniform in angle, with
degeneracy-sphere strata (magnitudes within 1e-6 of lam, exact zero vectors,
collinear and anti-collinear pairs).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .maps import (
    DegenParams,
    default_alpha,
    g_profile_batch,
    g_profile_diff_batch,
)

__all__ = [
    "SLACK_REL",
    "SampleConfig",
    "PairMargins",
    "ScalarMargins",
    "InequalityStats",
    "CampaignReport",
    "check_pair",
    "check_scalar",
    "run_campaign",
    "campaign_to_csv",
    "format_summary",
]

SLACK_REL = 1e-9

# fixed Gauss-Legendre order for campaign-scale profile evaluation; relative
# accuracy ~6e-11 on the acceptance grid, an order below the margin slack
_GL_NODES = 40

PAIR_KEYS = ("unit_vector", "monotonicity_4p2", "monotonicity_2p1", "v_vs_h")
SCALAR_KEYS = ("g_upper_bound", "phi_absorption")


@dataclass(frozen=True)
class SampleConfig:
    """Campaign sampling plan; defaults match the acceptance grid."""

    num_samples: int = 1_000_000
    p_values: tuple[float, ...] = (2.0, 2.5, 3.0, 4.0)
    lambda_values: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0)
    magnitude_range: tuple[float, float] = (1e-6, 1e6)
    seed: int = 20240707

    def __post_init__(self):
        if self.num_samples < 0:
            raise InvalidInputError("num_samples must be >= 0")
        lo, hi = self.magnitude_range
        if not (0.0 < lo < hi):
            raise InvalidInputError("magnitude range must satisfy 0 < min < max")
        if any(p < 2.0 for p in self.p_values):
            raise InvalidInputError("all p values must be >= 2")
        if any(lam < 0.0 for lam in self.lambda_values):
            raise InvalidInputError("all lambda values must be >= 0")


@dataclass(frozen=True)
class PairMargins:
    unit_vector_margin: float
    monotonicity_4p2_margin: float
    monotonicity_2p1_margin: float
    v_vs_h_margin: float
    lind_ratio: float


@dataclass(frozen=True)
class ScalarMargins:
    g_upper_margin: float
    phi_absorption_margin: float


@dataclass
class InequalityStats:
    """Aggregate for one inequality across one or more sample batches."""

    samples: int = 0
    violations: int = 0
    worst_rel_margin: float = math.inf
    worst_abs_margin: float = math.inf
    argmin: dict = field(default_factory=dict)

    def absorb(self, other: "InequalityStats") -> None:
        self.samples += other.samples
        self.violations += other.violations
        if other.worst_rel_margin < self.worst_rel_margin:
            self.worst_rel_margin = other.worst_rel_margin
            self.worst_abs_margin = other.worst_abs_margin
            self.argmin = other.argmin


@dataclass
class CampaignReport:
    config: SampleConfig
    stats: dict[str, InequalityStats]
    lind_sup: dict[float, float]
    total_samples: int

    @property
    def total_violations(self) -> int:
        return sum(s.violations for s in self.stats.values())

    @property
    def ok(self) -> bool:
        return self.total_violations == 0


# --------------------------------------------------------------------------
# stable primitives
# --------------------------------------------------------------------------


def _pow_diff(a: np.ndarray, b: np.ndarray, c: float) -> np.ndarray:
    """a^c - b^c for a, b >= 0, accurate in relative terms when a ~ b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    plain = a**c - b**c
    both = (a > 0.0) & (b > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(both, a / np.where(b > 0.0, b, 1.0), 1.0)
        stable = b**c * np.expm1(c * np.log(ratio))
    return np.where(both, stable, plain)


def _margins_batch(xi: np.ndarray, eta: np.ndarray, params: DegenParams) -> dict:
    """All pair margins on sample arrays of shape (m, n); NaN = not applicable."""
    p, lam = params.p, params.lam
    r1 = np.linalg.norm(xi, axis=-1)
    r2 = np.linalg.norm(eta, axis=-1)
    d = xi - eta
    dist = np.linalg.norm(d, axis=-1)
    both_nonzero = (r1 > 0.0) & (r2 > 0.0)
    safe_r1 = np.where(r1 > 0.0, r1, 1.0)
    safe_r2 = np.where(r2 > 0.0, r2, 1.0)
    u1 = xi / safe_r1[..., None]
    u2 = eta / safe_r2[..., None]
    udiff = np.linalg.norm(u1 - u2, axis=-1)
    udiff_sq = np.where(both_nonzero, udiff * udiff, 0.0)

    # (a) unit-vector bound; applicable when both vectors are nonzero
    lhs_a = udiff
    rhs_a = 2.0 * dist / safe_r2
    margin_a = np.where(both_nonzero, rhs_a - lhs_a, np.nan)
    scale_a = np.maximum(np.abs(lhs_a), np.abs(rhs_a))

    e1 = np.maximum(r1 - lam, 0.0)
    e2 = np.maximum(r2 - lam, 0.0)

    # monotonicity inner product <H_{p-1}(xi) - H_{p-1}(eta), xi - eta>
    h1 = e1 ** (p - 1.0)
    h2 = e2 ** (p - 1.0)
    u1_dot_d = np.einsum("...k,...k->...", u1, d)
    u2_dot_d = np.einsum("...k,...k->...", u2, d)
    plain_lhs = h1 * u1_dot_d - h2 * u2_dot_d
    dh = _pow_diff(e1, e2, p - 1.0)
    stable_lhs = dh * u1_dot_d + h2 * np.einsum("...k,...k->...", u1 - u2, d)
    lhs_mono = np.where(both_nonzero, stable_lhs, plain_lhs)

    # (b) against (4/p^2) |H_{p/2}(xi) - H_{p/2}(eta)|^2, via the identity
    # |A u1 - B u2|^2 = (A - B)^2 + A B |u1 - u2|^2
    a_half = e1 ** (p / 2.0)
    b_half = e2 ** (p / 2.0)
    dh_half = _pow_diff(e1, e2, p / 2.0)
    h_half_sq = dh_half * dh_half + a_half * b_half * udiff_sq
    rhs_b = (4.0 / (p * p)) * h_half_sq
    margin_b = lhs_mono - rhs_b
    scale_b = np.maximum(np.abs(lhs_mono), np.abs(rhs_b))

    # (c) applicable when |eta| > lam
    applicable_c = r2 > lam
    rhs_c = (
        e2**p
        * dist
        * dist
        / (2.0 ** (p + 1.0) * safe_r2 * np.maximum(r1 + r2, 1e-300))
    )
    margin_c = np.where(applicable_c, lhs_mono - rhs_c, np.nan)
    scale_c = np.maximum(np.abs(lhs_mono), np.abs(rhs_c))

    # (d) |V(xi) - V(eta)|^2 <= C_p <...>
    g1 = g_profile_batch(e1, params, nodes=_GL_NODES)
    g2 = g_profile_batch(e2, params, nodes=_GL_NODES)
    t_lo = np.minimum(e1, e2)
    t_hi = np.maximum(e1, e2)
    g_lo = np.where(e1 <= e2, g1, g2)
    g_hi = np.where(e1 <= e2, g2, g1)
    dg = g_profile_diff_batch(
        t_lo, t_hi, params, nodes=_GL_NODES, g_lo=g_lo, g_hi=g_hi
    )
    v_diff_sq = dg * dg + g1 * g2 * udiff_sq
    c_p = 2.0 + 2.0 ** (p + 7.0) / (p * p)
    rhs_d = c_p * lhs_mono
    margin_d = rhs_d - v_diff_sq
    scale_d = np.maximum(np.abs(v_diff_sq), np.abs(rhs_d))

    out = {
        "unit_vector": (margin_a, scale_a),
        "monotonicity_4p2": (margin_b, scale_b),
        "monotonicity_2p1": (margin_c, scale_c),
        "v_vs_h": (margin_d, scale_d),
    }

    # (e) recorded ratio for p > 2, lam = 0
    if p > 2.0 and lam == 0.0:
        a_l = r1 ** (p / 2.0)
        b_l = r2 ** (p / 2.0)
        w_diff_sq = _pow_diff(r1, r2, p / 2.0) ** 2 + a_l * b_l * udiff_sq
        with np.errstate(divide="ignore", invalid="ignore"):
            lind = np.where(
                (dist > 0.0) & (w_diff_sq > 0.0), dist**p / w_diff_sq, np.nan
            )
    else:
        lind = np.full_like(dist, np.nan)
    out["lind_ratio"] = (lind, None)
    out["_g_e1"] = (g1, None)
    return out


def _scalar_margins_batch(t: np.ndarray, params: DegenParams, g=None) -> dict:
    """Profile-bound and weight-absorption margins on t >= 0 arrays."""
    p, lam, a = params.p, params.lam, params.alpha
    if g is None:
        g = g_profile_batch(t, params, nodes=_GL_NODES)
    with np.errstate(divide="ignore", invalid="ignore"):
        kfac = np.where(t > 0.0, (t / (t + lam)) ** (0.5 * (1.0 + 2.0 * a)), 0.0)
    bound = (2.0 / p) * t ** (p / 2.0) * kfac
    margin_g = bound - g
    scale_g = np.maximum(np.abs(g), np.abs(bound))

    if lam == 0.0:
        phi = np.where(t > 0.0, 1.0, 0.0)
        dphi = np.zeros_like(t)
    else:
        denom = t * t + lam * lam
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(t > 0.0, t ** (2.0 * a) / denom**a, 0.0)
            dphi = np.where(
                t > 0.0,
                2.0 * a * lam * lam * t ** (2.0 * a - 1.0) / denom ** (a + 1.0),
                0.0,
            )
    lhs = dphi * t
    rhs = 2.0 * a * phi
    margin_phi = rhs - lhs
    scale_phi = np.maximum(np.abs(lhs), np.abs(rhs))
    return {
        "g_upper_bound": (margin_g, scale_g),
        "phi_absorption": (margin_phi, scale_phi),
    }


def check_pair(xi, eta, params: DegenParams) -> PairMargins:
    """Margins of inequalities (a)-(d) plus the recorded Lind ratio for one pair."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if xi.shape != eta.shape or xi.ndim != 1:
        raise InvalidInputError("xi and eta must be 1-D vectors of equal length")
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(eta))):
        raise InvalidInputError("vectors must be finite")
    res = _margins_batch(xi[None, :], eta[None, :], params)
    return PairMargins(
        unit_vector_margin=float(res["unit_vector"][0][0]),
        monotonicity_4p2_margin=float(res["monotonicity_4p2"][0][0]),
        monotonicity_2p1_margin=float(res["monotonicity_2p1"][0][0]),
        v_vs_h_margin=float(res["v_vs_h"][0][0]),
        lind_ratio=float(res["lind_ratio"][0][0]),
    )


def check_scalar(t: float, params: DegenParams) -> ScalarMargins:
    """Margins of the profile upper bound and the weight absorption inequality."""
    if not math.isfinite(t) or t < 0.0:
        raise InvalidInputError(f"t must be >= 0, got {t}")
    res = _scalar_margins_batch(np.asarray([t], dtype=float), params)
    return ScalarMargins(
        g_upper_margin=float(res["g_upper_bound"][0][0]),
        phi_absorption_margin=float(res["phi_absorption"][0][0]),
    )


# --------------------------------------------------------------------------
# campaign
# --------------------------------------------------------------------------


def _draw_samples(config: SampleConfig, p: float, lam: float):
    """Log-uniform magnitudes and uniform angles, plus degeneracy strata.

    The combo seed is derived from (seed, p, lam) so that shards are
    independent of execution order.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, int(p * 1000), int(lam * 1000)])
    )
    m = config.num_samples
    lo, hi = config.magnitude_range

    def mags(k):
        return np.exp(rng.uniform(math.log(lo), math.log(hi), k))

    def angles(k):
        return rng.uniform(0.0, 2.0 * math.pi, k)

    r1 = mags(m)
    r2 = mags(m)
    th1 = angles(m)
    th2 = angles(m)

    ns = min(m, 10_000)
    blocks_r1 = [r1]
    blocks_r2 = [r2]
    blocks_t1 = [th1]
    blocks_t2 = [th2]

    def add(rr1, rr2, tt1, tt2):
        blocks_r1.append(rr1)
        blocks_r2.append(rr2)
        blocks_t1.append(tt1)
        blocks_t2.append(tt2)

    if ns > 0:
        if lam > 0.0:
            near = lambda k: np.maximum(lam + rng.uniform(-1e-6, 1e-6, k), 0.0)
            add(near(ns), mags(ns), angles(ns), angles(ns))
            add(mags(ns), near(ns), angles(ns), angles(ns))
            add(near(ns), near(ns), angles(ns), angles(ns))
        # exact zero vectors on either side
        add(np.zeros(ns), mags(ns), np.zeros(ns), angles(ns))
        add(mags(ns), np.zeros(ns), angles(ns), np.zeros(ns))
        # collinear and anti-collinear pairs
        th = angles(ns)
        add(mags(ns), mags(ns), th, th)
        th = angles(ns)
        add(mags(ns), mags(ns), th, np.mod(th + math.pi, 2.0 * math.pi))

    r1 = np.concatenate(blocks_r1)
    r2 = np.concatenate(blocks_r2)
    th1 = np.concatenate(blocks_t1)
    th2 = np.concatenate(blocks_t2)
    xi = np.stack([r1 * np.cos(th1), r1 * np.sin(th1)], axis=-1)
    eta = np.stack([r2 * np.cos(th2), r2 * np.sin(th2)], axis=-1)
    xi[r1 == 0.0] = 0.0
    eta[r2 == 0.0] = 0.0
    return xi, eta


def _combo_stats(config: SampleConfig, p: float, lam: float):
    params = DegenParams(p, lam, default_alpha(p, lam))
    xi, eta = _draw_samples(config, p, lam)
    res = _margins_batch(xi, eta, params)
    e1 = np.maximum(np.linalg.norm(xi, axis=-1) - lam, 0.0)
    g_e1 = res.pop("_g_e1")[0]
    res.update(_scalar_margins_batch(e1, params, g=g_e1))

    stats: dict[str, InequalityStats] = {}
    for key in PAIR_KEYS + SCALAR_KEYS:
        margin, scale = res[key]
        applicable = np.isfinite(margin)
        rel = np.where(
            applicable & (scale > 0.0),
            margin / np.where(scale > 0.0, scale, 1.0),
            np.where(applicable, 0.0, np.inf),
        )
        violations = int(np.sum(rel < -SLACK_REL))
        idx = int(np.argmin(rel))
        entry = InequalityStats(
            samples=int(np.sum(applicable)),
            violations=violations,
            worst_rel_margin=float(rel[idx]),
            worst_abs_margin=float(margin[idx]) if applicable[idx] else math.inf,
            argmin={
                "p": p,
                "lam": lam,
                "xi": xi[idx].tolist(),
                "eta": eta[idx].tolist(),
                "t": float(e1[idx]),
            },
        )
        stats[key] = entry

    lind = res["lind_ratio"][0]
    lind_sup = float(np.nanmax(lind)) if np.any(np.isfinite(lind)) else math.nan
    return stats, lind_sup, xi.shape[0]


def run_campaign(config: SampleConfig, threads: int = 1) -> CampaignReport:
    """Evaluate every inequality on num_samples draws per (p, lambda) combination.

    Deterministic for a fixed config: shards are seeded per combination and the
    merge is order-independent, so reports are bit-identical across reruns and
    thread counts.
    """
    combos = [(p, lam) for p in config.p_values for lam in config.lambda_values]
    results = {}
    if config.num_samples == 0:
        merged = {key: InequalityStats() for key in PAIR_KEYS + SCALAR_KEYS}
        return CampaignReport(config, merged, {}, 0)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                combo: pool.submit(_combo_stats, config, *combo) for combo in combos
            }
            for combo, fut in futures.items():
                results[combo] = fut.result()
    else:
        for combo in combos:
            results[combo] = _combo_stats(config, *combo)

    merged = {key: InequalityStats() for key in PAIR_KEYS + SCALAR_KEYS}
    lind_sup: dict[float, float] = {}
    total = 0
    for combo in combos:  # fixed order => deterministic merge
        stats, lsup, count = results[combo]
        total += count
        for key, entry in stats.items():
            merged[key].absorb(entry)
        p, lam = combo
        if lam == 0.0 and math.isfinite(lsup):
            lind_sup[p] = max(lind_sup.get(p, 0.0), lsup)
    return CampaignReport(config, merged, lind_sup, total)


def campaign_to_csv(report: CampaignReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "inequality",
                "samples",
                "violations",
                "worst_rel_margin",
                "worst_abs_margin",
                "argmin_p",
                "argmin_lambda",
                "argmin_xi_x",
                "argmin_xi_y",
                "argmin_eta_x",
                "argmin_eta_y",
                "argmin_t",
            ]
        )
        for key in PAIR_KEYS + SCALAR_KEYS:
            s = report.stats[key]
            arg = s.argmin or {}
            xi = arg.get("xi", [math.nan, math.nan])
            eta = arg.get("eta", [math.nan, math.nan])
            writer.writerow(
                [
                    key,
                    s.samples,
                    s.violations,
                    repr(s.worst_rel_margin),
                    repr(s.worst_abs_margin),
                    repr(arg.get("p", math.nan)),
                    repr(arg.get("lam", math.nan)),
                    repr(xi[0]),
                    repr(xi[1]),
                    repr(eta[0]),
                    repr(eta[1]),
                    repr(arg.get("t", math.nan)),
                ]
            )
        for p, sup in sorted(report.lind_sup.items()):
            writer.writerow(["lind_sup_ratio", "", "", repr(sup), "", repr(p), "0.0"]
                            + [""] * 5)


def format_summary(report: CampaignReport) -> str:
    lines = [
        f"inequality campaign: {report.total_samples} samples over "
        f"{len(report.config.p_values) * len(report.config.lambda_values)} (p, lambda) combos",
    ]
    for key in PAIR_KEYS + SCALAR_KEYS:
        s = report.stats[key]
        lines.append(
            f"  {key:18s} violations={s.violations:d}  "
            f"worst rel margin={s.worst_rel_margin:+.3e}"
        )
    for p, sup in sorted(report.lind_sup.items()):
        lines.append(f"  lind ratio sup (p={p}): {sup:.6g}")
    lines.append("RESULT: " + ("PASS" if report.ok else "FAIL"))
    return "\n".join(lines)
