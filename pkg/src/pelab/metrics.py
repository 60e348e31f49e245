"""Task-agnostic certification metrics computed on frozen encoders.

The suite covers invariance curves with AUC summaries, nuisance leakage
(probe AUC and normalized mutual information), smoothness, geometry
diagnostics, factor disentanglement, nuisance Fisher trace, a sufficiency
surrogate, two-sample separability, and secondary linear-probe
data-efficiency.  Results are assembled into a MetricReport whose
serialization is byte-deterministic for fixed config and seed.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import infotheory as it
from .errors import ContractViolation, NotApplicableError
from .numerics import Encoder, Rng
from .objectives import covariance_penalty_value_grad, variance_floor_value_grad
from .probes import fit_linear_probe, evaluate_probe, probe_split_evaluate
from .worlds import World, magnitude_transform, sample_batch


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

@dataclass
class Curve:
    """D(alpha) over a strictly increasing magnitude grid, with its
    trapezoidal area."""
    alphas: np.ndarray
    values: np.ndarray
    auc: float = 0.0

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.alphas.ndim != 1 or self.alphas.shape != self.values.shape:
            raise ContractViolation("curve grid/values must be aligned 1-d arrays")
        if np.any(np.diff(self.alphas) <= 0):
            raise ContractViolation("curve grid must be strictly increasing")
        if np.any(self.values < 0):
            raise ContractViolation("curve values must be >= 0")
        self.auc = float(np.trapezoid(self.values, self.alphas))

    def to_dict(self):
        return {"alphas": [float(a) for a in self.alphas],
                "values": [float(v) for v in self.values],
                "auc": self.auc}

    @staticmethod
    def from_dict(d):
        return Curve(np.array(d["alphas"]), np.array(d["values"]))


def invariance_curve(enc: Encoder, world: World, grid, n: int, rng: Rng) -> Curve:
    """Monte Carlo D(alpha) = E||f(x) - f(tau_alpha x)||^2 on a magnitude grid.

    One input sample of size n is reused across all grid points; alpha = 0 is
    the identity, so D(0) is exactly zero.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid[0] != 0.0:
        raise ContractViolation("curve grid must include alpha = 0 first")
    x = world.sample_x(rng, n)
    z = enc.forward(x)
    values = np.empty(grid.size)
    for i, alpha in enumerate(grid):
        delta = magnitude_transform(world, alpha)
        xa = world.transforms.apply(np.full(n, delta), x)
        diff = z - enc.forward(xa)
        values[i] = float(np.mean(np.sum(diff * diff, axis=1)))
    return Curve(grid, values)


def uniform_grid(alpha_max: float, points: int) -> np.ndarray:
    return np.linspace(0.0, alpha_max, points)


# ---------------------------------------------------------------------------
# Leakage
# ---------------------------------------------------------------------------

def leakage_probe(zbatch, v, rng: Rng, test_frac: float = 0.3) -> dict:
    """Linear logistic probe predicting the nuisance from the code.

    Returns held-out one-vs-rest macro AUC, error rate, and the symmetric
    leakage score 2*|AUC - 1/2| (AUC far from 1/2 in either direction means
    the nuisance is decodable).
    """
    z = np.asarray(zbatch, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] < 100:
        raise ContractViolation("leakage probe requires n >= 100")
    v_codes = it.codes_of(v)
    if np.unique(v_codes).size < 2:
        raise ContractViolation("AUC is undefined for a single-class nuisance")
    _, ev = probe_split_evaluate(z, v_codes, rng, test_frac=test_frac)
    return {"auc": ev.auc, "error": ev.error,
            "leakage_score": float(abs(ev.auc - 0.5) * 2.0),
            "n_heldout": ev.n}


def normalized_mi(zbatch, v, n_bins: int = 8, max_dims: int = 2) -> float:
    """Plug-in I(binned Z; V) / H(V); quantile bins on at most ``max_dims``
    leading principal directions."""
    v_codes = it.codes_of(v)
    h_v = it.entropy_bits(v_codes)
    if h_v <= 0.0:
        raise ContractViolation("H(V) = 0: normalized MI undefined")
    z_codes = it.discretize_codes(np.asarray(zbatch, dtype=np.float64),
                                  n_bins=n_bins, max_dims=max_dims)
    return it.mutual_information_bits(z_codes, v_codes) / h_v


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def smoothness(enc: Encoder, world: World, n: int, rng: Rng) -> float:
    """Monte Carlo E||d f / d x||_F^2 (Jacobian energy)."""
    x = world.sample_x(rng, n)
    return float(np.mean([np.sum(enc.input_jacobian(xi) ** 2) for xi in x]))


def geometry_diagnostics(zbatch, gamma: float) -> dict:
    z = np.asarray(zbatch, dtype=np.float64)
    var_violation, _ = variance_floor_value_grad(z, gamma)
    cov_offdiag, _ = covariance_penalty_value_grad(z)
    per_dim = z.var(axis=0, ddof=1)
    return {"var_floor_violation": float(var_violation),
            "cov_offdiag": float(cov_offdiag),
            "per_dim_variance": [float(v) for v in per_dim],
            "gamma": float(gamma)}


def fisher_trace(enc: Encoder, world: World, n: int, rng: Rng,
                 step: float = 1e-3) -> float:
    """Expected squared sensitivity of the code to the transform parameter at
    the identity: trace of E[J_delta J_delta^T] via central differences."""
    fam = world.transforms
    if not getattr(fam, "smooth", False):
        raise NotApplicableError(
            f"transform family {fam.kind!r} is not smooth in delta")
    x = world.sample_x(rng, n)
    zp = enc.forward(fam.apply(np.full(n, step), x))
    zm = enc.forward(fam.apply(np.full(n, -step), x))
    j = (zp - zm) / (2.0 * step)
    return float(np.mean(np.sum(j * j, axis=1)))


# ---------------------------------------------------------------------------
# Disentanglement and sufficiency
# ---------------------------------------------------------------------------

def _nmi_bits(a_codes, b_codes) -> float:
    ha = it.entropy_bits(a_codes)
    hb = it.entropy_bits(b_codes)
    if ha <= 0.0 or hb <= 0.0:
        return 0.0
    return it.mutual_information_bits(a_codes, b_codes) / np.sqrt(ha * hb)


def disentanglement_nmi(zbatch, factors, n_bins: int = 8) -> dict:
    """Sum over factors of the best-dimension NMI shortfall.

    Constant factors are skipped and recorded as warnings.
    """
    z = np.asarray(zbatch, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    factors = np.asarray(factors, dtype=np.float64)
    if factors.ndim == 1:
        factors = factors[:, None]
    z_codes = [it.quantile_codes(z[:, d], n_bins) for d in range(z.shape[1])]
    score = 0.0
    per_factor = []
    skipped = []
    for u in range(factors.shape[1]):
        col = factors[:, u]
        if np.unique(col).size < 2:
            skipped.append(u)
            continue
        u_codes = it.quantile_codes(col, n_bins)
        best = max(_nmi_bits(zc, u_codes) for zc in z_codes)
        per_factor.append(float(best))
        score += 1.0 - best
    return {"score": float(score), "best_nmi_per_factor": per_factor,
            "skipped_constant_factors": skipped}


_DISCRETE_SUPPORT_MAX = 64


def sufficiency_surrogate(zbatch, xbatch, orbit_ids, n_bins: int = 8) -> float:
    """Plug-in conditional mutual information I(X; Z | T) in bits.

    Requires a finitely supported input space; continuous X is rejected with
    a not-applicable error.  Codes with small discrete support are used
    exactly, otherwise they are quantile-binned.
    """
    x = np.asarray(xbatch, dtype=np.float64)
    x_codes = it.rows_as_codes(x)
    if np.unique(x_codes).size > _DISCRETE_SUPPORT_MAX:
        raise NotApplicableError("sufficiency surrogate requires discrete X")
    z = np.asarray(zbatch, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    z_codes = it.rows_as_codes(z)
    if np.unique(z_codes).size > _DISCRETE_SUPPORT_MAX:
        z_codes = it.discretize_codes(z, n_bins=n_bins)
    t_codes = it.rows_as_codes(np.asarray(orbit_ids, dtype=np.float64))
    return it.conditional_mi_bits(x_codes, z_codes, t_codes)


# ---------------------------------------------------------------------------
# Separability
# ---------------------------------------------------------------------------

def _sq_dists(a, b) -> np.ndarray:
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * (a @ b.T), 0.0)


_BANDWIDTH_SAMPLE_MAX = 512


def median_bandwidth_sq(pooled: np.ndarray) -> float:
    # the heuristic needs only the median pairwise distance; an evenly spaced
    # subsample keeps it O(512^2) and deterministic
    if pooled.shape[0] > _BANDWIDTH_SAMPLE_MAX:
        idx = np.linspace(0, pooled.shape[0] - 1, _BANDWIDTH_SAMPLE_MAX).astype(int)
        pooled = pooled[idx]
    d2 = _sq_dists(pooled, pooled)
    iu = np.triu_indices(pooled.shape[0], k=1)
    med = float(np.median(d2[iu]))
    return med / 2.0 if med > 0 else 1.0


def _as_samples(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return z[:, None] if z.ndim == 1 else z


def separability(zbatch_a, zbatch_b) -> dict:
    """Fisher ratio and unbiased RBF-kernel MMD^2 between two code groups."""
    a, b = _as_samples(zbatch_a), _as_samples(zbatch_b)
    m, n = a.shape[0], b.shape[0]
    if m < 20 or n < 20:
        raise ContractViolation("separability requires >= 20 samples per group")

    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    within = float(np.sum(a.var(axis=0, ddof=1)) + np.sum(b.var(axis=0, ddof=1)))
    gap = float(np.sum((mu_a - mu_b) ** 2))
    fisher = gap / within if within > 0 else float("inf")

    h2 = median_bandwidth_sq(np.vstack([a, b]))
    kaa = np.exp(-_sq_dists(a, a) / (2.0 * h2))
    kbb = np.exp(-_sq_dists(b, b) / (2.0 * h2))
    kab = np.exp(-_sq_dists(a, b) / (2.0 * h2))
    mmd2 = ((kaa.sum() - np.trace(kaa)) / (m * (m - 1))
            + (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
            - 2.0 * kab.mean())
    return {"fisher_ratio": float(fisher), "mmd2": float(mmd2),
            "bandwidth_sq": h2}


def radial_fisher(zbatch_a, zbatch_b) -> float:
    """Fisher ratio on code norms only (interpretation of the 'radial'
    separability diagnostic; flagged as such in reports)."""
    na = np.linalg.norm(_as_samples(zbatch_a), axis=1)
    nb = np.linalg.norm(_as_samples(zbatch_b), axis=1)
    return separability(na, nb)["fisher_ratio"]


# ---------------------------------------------------------------------------
# Probe data-efficiency (secondary)
# ---------------------------------------------------------------------------

def probe_data_efficiency(enc: Encoder, world: World, label_budgets,
                          rng: Rng, pool_n: int = 4096,
                          heldout_n: int = 2000) -> dict:
    """Held-out accuracy of a linear probe per label budget (nested subsets
    of one labeled pool).  Secondary metric: uses labels by design."""
    budgets = [int(b) for b in label_budgets]
    if any(b < 2 for b in budgets):
        raise ContractViolation("label budgets must be >= 2")
    if max(budgets) > pool_n:
        raise ContractViolation(
            f"budget {max(budgets)} exceeds available pool of {pool_n}")
    if world.label_fn is None:
        raise NotApplicableError(f"world {world.name!r} exposes no labels")
    data_rng, probe_rng = rng.split(2)
    x_pool = world.sample_x(data_rng, pool_n)
    y_pool = world.label_fn(x_pool)
    z_pool = enc.forward(x_pool)
    x_test = world.sample_x(data_rng, heldout_n)
    y_test = world.label_fn(x_test)
    z_test = enc.forward(x_test)
    acc = {}
    for budget in budgets:
        head = fit_linear_probe(z_pool[:budget], y_pool[:budget], probe_rng)
        acc[str(budget)] = evaluate_probe(head, z_test, y_test).accuracy
    return {"accuracy_per_budget": acc, "heldout_n": heldout_n,
            "secondary": True}


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class MetricEntry:
    value: float | None = None
    status: str = "ok"          # ok | not_applicable | degenerate
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "status": self.status, "detail": self.detail}

    @staticmethod
    def from_dict(d):
        return MetricEntry(value=d["value"], status=d["status"], detail=d["detail"])


@dataclass
class MetricReport:
    metrics: dict = field(default_factory=dict)    # name -> MetricEntry
    curves: dict = field(default_factory=dict)     # name -> Curve
    theory: dict = field(default_factory=dict)     # name -> verdict dict
    notes: list = field(default_factory=list)
    config_hash: str = ""
    seed: int = 0

    def add(self, name: str, value=None, status="ok", **detail):
        self.metrics[name] = MetricEntry(value=value, status=status, detail=detail)

    def record(self, name: str, fn):
        """Run a metric body; map NotApplicableError to a recorded entry."""
        try:
            fn()
        except NotApplicableError as exc:
            self.add(name, status="not_applicable", reason=str(exc))

    def validate(self):
        for name, entry in self.metrics.items():
            if entry.status == "ok" and entry.value is not None \
                    and not np.isfinite(entry.value):
                raise ContractViolation(f"metric {name!r} reported a non-finite value")

    def to_json(self) -> str:
        doc = {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "metrics": {k: v.to_dict() for k, v in sorted(self.metrics.items())},
            "curves": {k: v.to_dict() for k, v in sorted(self.curves.items())},
            "theory": self.theory,
            "notes": self.notes,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "MetricReport":
        doc = json.loads(text)
        rep = MetricReport(config_hash=doc["config_hash"], seed=doc["seed"],
                           theory=doc["theory"], notes=doc["notes"])
        rep.metrics = {k: MetricEntry.from_dict(v) for k, v in doc["metrics"].items()}
        rep.curves = {k: Curve.from_dict(v) for k, v in doc["curves"].items()}
        return rep


def worker_count() -> int:
    """Worker cap for concurrent metric evaluation (PEL_THREADS, default 1)."""
    try:
        return max(1, int(os.environ.get("PEL_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class MetricSuiteOptions:
    n: int = 10000
    curve_points: int = 33
    curve_alpha_max: float = float(np.pi)
    gamma: float = 1.0
    mi_bins: int = 8
    probe_budgets: tuple = (64, 256, 1024)
    probe_pool_n: int = 4096
    run_probe_efficiency: bool = True


def certify_encoder(enc: Encoder, world: World, opts: MetricSuiteOptions,
                    rng: Rng, config_hash: str = "", seed: int = 0) -> MetricReport:
    """Run the full certification suite on a frozen encoder.

    Each metric draws from its own pre-split RNG substream, so results do not
    depend on evaluation order or on the PEL_THREADS worker count.
    """
    report = MetricReport(config_hash=config_hash, seed=seed)
    streams = rng.split(8)
    batch = sample_batch(world, opts.n, streams[0])
    z = enc.forward(batch.x)

    def run_curve():
        curve = invariance_curve(
            enc, world, uniform_grid(opts.curve_alpha_max, opts.curve_points),
            opts.n, streams[1])
        report.curves["invariance"] = curve
        report.add("invariance_auc", value=curve.auc,
                   grid_points=opts.curve_points,
                   alpha_max=opts.curve_alpha_max, n=opts.n)

    def run_leakage():
        if batch.v is None:
            raise NotApplicableError("world exposes no nuisance variable")
        res = leakage_probe(z, _discrete_nuisance(batch.v), streams[2])
        report.add("leakage_probe_auc", value=res["auc"],
                   leakage_score=res["leakage_score"], error=res["error"],
                   n_heldout=res["n_heldout"])

    def run_nmi():
        if batch.v is None:
            raise NotApplicableError("world exposes no nuisance variable")
        val = normalized_mi(z, _discrete_nuisance(batch.v), n_bins=opts.mi_bins)
        report.add("normalized_mi", value=val, bins=opts.mi_bins, n=opts.n)

    def run_smoothness():
        report.add("smoothness", value=smoothness(enc, world, opts.n, streams[3]),
                   n=opts.n)

    def run_geometry():
        geo = geometry_diagnostics(z, opts.gamma)
        report.add("var_floor_violation", value=geo["var_floor_violation"],
                   gamma=opts.gamma)
        report.add("cov_offdiag", value=geo["cov_offdiag"])
        report.add("per_dim_variance", value=float(min(geo["per_dim_variance"])),
                   per_dim=geo["per_dim_variance"])

    def run_disentanglement():
        if world.factors is None:
            raise NotApplicableError("world exposes no generative factors")
        res = disentanglement_nmi(z, world.factors(batch.x), n_bins=opts.mi_bins)
        report.add("disentanglement_nmi", value=res["score"],
                   best_nmi_per_factor=res["best_nmi_per_factor"],
                   skipped_constant_factors=res["skipped_constant_factors"],
                   factor_names=world.factor_names)

    def run_fisher():
        report.add("fisher_trace",
                   value=fisher_trace(enc, world, opts.n, streams[4]), n=opts.n)

    def run_sufficiency():
        report.add("sufficiency_cmi_bits",
                   value=sufficiency_surrogate(z, batch.x, batch.t))

    def run_separability():
        groups = _two_orbit_groups(z, batch.t)
        if groups is None:
            raise NotApplicableError("need two orbit groups with >= 20 samples")
        za, zb = groups
        res = separability(za, zb)
        report.add("fisher_ratio", value=_finite_or_none(res["fisher_ratio"]),
                   status="degenerate" if not np.isfinite(res["fisher_ratio"]) else "ok",
                   bandwidth_sq=res["bandwidth_sq"])
        report.add("mmd2", value=res["mmd2"], bandwidth_sq=res["bandwidth_sq"])
        report.add("radial_fisher", value=_finite_or_none(radial_fisher(za, zb)),
                   interpretation="fisher ratio on code norms")

    def run_probe_eff():
        if not opts.run_probe_efficiency:
            raise NotApplicableError("probe efficiency disabled")
        res = probe_data_efficiency(enc, world, opts.probe_budgets, streams[5],
                                    pool_n=opts.probe_pool_n)
        report.add("probe_data_efficiency",
                   value=res["accuracy_per_budget"][str(max(opts.probe_budgets))],
                   accuracy_per_budget=res["accuracy_per_budget"],
                   secondary=True)

    jobs = [("invariance_auc", run_curve), ("leakage_probe_auc", run_leakage),
            ("normalized_mi", run_nmi), ("smoothness", run_smoothness),
            ("geometry", run_geometry), ("disentanglement_nmi", run_disentanglement),
            ("fisher_trace", run_fisher), ("sufficiency_cmi_bits", run_sufficiency),
            ("separability", run_separability),
            ("probe_data_efficiency", run_probe_eff)]

    workers = worker_count()
    if workers > 1:
        # metrics are read-only over the encoder; report.record is the only
        # shared write and each job touches distinct keys
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(report.record, name, fn) for name, fn in jobs]
            for f in futures:
                f.result()
    else:
        for name, fn in jobs:
            report.record(name, fn)

    report.notes.append("fisher_trace/invariance_auc are Euclidean functionals "
                        "and metric-dependent under reparameterization")
    report.validate()
    return report


def _finite_or_none(x: float):
    return float(x) if np.isfinite(x) else None


def _discrete_nuisance(v: np.ndarray, n_bins: int = 8) -> np.ndarray:
    """Probe targets must be discrete; bin continuous nuisances (angles)."""
    v = np.asarray(v, dtype=np.float64)
    if np.unique(v).size <= n_bins:
        return it.codes_of(v)
    return it.quantile_codes(v, n_bins)


_GROUP_SAMPLE_MAX = 2048


def _cap_group(z: np.ndarray) -> np.ndarray:
    # bound the O(n^2) kernel matrices; evenly spaced, hence deterministic
    if z.shape[0] <= _GROUP_SAMPLE_MAX:
        return z
    idx = np.linspace(0, z.shape[0] - 1, _GROUP_SAMPLE_MAX).astype(int)
    return z[idx]


def _two_orbit_groups(z: np.ndarray, t) -> tuple | None:
    """Split codes into two groups by orbit statistic (the two most common
    ids for discrete t, below/above the median for continuous t)."""
    if t is None:
        return None
    t = np.asarray(t, dtype=np.float64)
    if t.ndim > 1:
        t_codes = it.rows_as_codes(t)
        vals, counts = np.unique(t_codes, return_counts=True)
        if vals.size < 2:
            return None
        top = vals[np.argsort(counts)[::-1][:2]]
        mask_a, mask_b = t_codes == top[0], t_codes == top[1]
    else:
        vals = np.unique(t)
        if vals.size < 2:
            return None
        if vals.size <= _DISCRETE_SUPPORT_MAX:
            _, counts = np.unique(t, return_counts=True)
            top = vals[np.argsort(counts)[::-1][:2]]
            mask_a, mask_b = t == top[0], t == top[1]
        else:
            med = np.median(t)
            mask_a, mask_b = t <= med, t > med
    if mask_a.sum() < 20 or mask_b.sum() < 20:
        return None
    return _cap_group(z[mask_a]), _cap_group(z[mask_b])
