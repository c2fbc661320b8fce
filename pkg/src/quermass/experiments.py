"""Registry of named, reproducible experiments and their report format.

Each experiment checks one claim about random polytopes or projection
functionals at desk scale.  All randomness comes from
``RngStream(seed).child(task)`` so a report depends only on the config,
never on the worker count; results are gathered in task order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import stats

from . import __version__, bodies, functionals, hulls, models
from .bodies import BodySpec
from .numerics import DegenerateInputError, RngStream
from .sampling import sample_beta, sample_cone, sample_uniform

CSV_SCHEMA = 1
CHUNK = 250


class UnknownExperimentError(KeyError):
    pass


class InvalidParamsError(ValueError):
    pass


# ---------------------------------------------------------------- config / report


@dataclass
class ExperimentConfig:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        extra = set(d) - {"name", "params", "seed", "workers", "output_dir"}
        if extra:
            raise InvalidParamsError(f"unknown config keys: {sorted(extra)}")
        if "name" not in d:
            raise InvalidParamsError("config needs a 'name'")
        if not isinstance(d.get("workers", 1), int) or d.get("workers", 1) < 1:
            raise InvalidParamsError("workers must be a positive integer")
        return cls(
            name=d["name"],
            params=dict(d.get("params", {})),
            seed=int(d.get("seed", 0)),
            workers=int(d.get("workers", 1)),
            output_dir=str(d.get("output_dir", "out")),
        )

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _clean(x):
    # JSON-safe and deterministic: numpy scalars to python, non-finite to None
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def make_row(params: dict, estimates: dict | None = None, stderrs: dict | None = None, ratios: dict | None = None, passed: bool = True, kind: str = "result", error: str | None = None) -> dict:
    row = {
        "kind": kind,
        "params": params,
        "estimates": estimates or {},
        "stderrs": stderrs or {},
        "ratios": ratios or {},
        "pass": bool(passed),
    }
    if error is not None:
        row["error"] = error
    return row


@dataclass
class ExperimentReport:
    rows: list
    meta: dict

    @property
    def failed(self) -> bool:
        return any(not r["pass"] for r in self.rows)

    def to_dict(self) -> dict:
        return _clean({"meta": self.meta, "rows": self.rows})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def csv_columns(self) -> list[str]:
        cols = ["kind"]
        for section in ("params", "estimates", "stderrs", "ratios"):
            for r in self.rows:
                for key in r[section]:
                    c = f"{section}.{key}"
                    if c not in cols:
                        cols.append(c)
        return cols + ["pass", "error"]

    def to_csv(self) -> str:
        cols = self.csv_columns()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in _clean(self.rows):
            out = []
            for c in cols:
                if "." in c:
                    section, key = c.split(".", 1)
                    v = r[section].get(key, "")
                else:
                    v = r.get(c, "")
                out.append(json.dumps(v) if isinstance(v, (list, dict)) else ("" if v is None else v))
            w.writerow(out)
        return buf.getvalue()

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            fh.write(self.to_json())
        with open(os.path.join(out_dir, "report.csv"), "w") as fh:
            fh.write(self.to_csv())


# ---------------------------------------------------------------- parallel map


class Lanes:
    """Ordered map over tasks on ``workers`` processes (inline when workers == 1)."""

    def __init__(self, workers: int):
        self.workers = max(1, int(workers))
        self._pool = None

    def __enter__(self):
        if self.workers > 1:
            self._pool = ProcessPoolExecutor(max_workers=self.workers)
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()

    def map(self, fn: Callable, tasks: list) -> list:
        if self._pool is None:
            return [fn(*t) for t in tasks]
        chunk = max(1, len(tasks) // (4 * self.workers))
        return list(self._pool.map(_star, [(fn, t) for t in tasks], chunksize=chunk))


def _star(ft):
    fn, t = ft
    return fn(*t)


def _volume_chunk(K, k: int, stream: RngStream, lo: int, hi: int) -> np.ndarray:
    n = K.dim
    out = np.empty(hi - lo)
    for i, j in enumerate(range(lo, hi)):
        child = stream.child(j)
        F = functionals.sample_grassmannian(n, k, child)
        out[i] = functionals.projection_volume(K, F, seed=stream.seed, rng=child.child(1)).volume
    return out


def parallel_volumes(lanes: Lanes, K, k: int, m: int, stream: RngStream) -> np.ndarray:
    """Same numbers as ``functionals.projection_volumes(K, k, m, stream)``, split across lanes."""
    tasks = [(K, k, stream, lo, min(lo + CHUNK, m)) for lo in range(0, m, CHUNK)]
    return np.concatenate(lanes.map(_volume_chunk, tasks))


# ---------------------------------------------------------------- schemas


@dataclass(frozen=True)
class Param:
    kind: str  # int, float, bool, str, int-list, float-list, body
    default: Any
    choices: tuple = ()
    minimum: float | None = None

    def check(self, value) -> str | None:
        def num(v, integral):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                return False
            return (not integral) or float(v).is_integer()

        k = self.kind
        if k in ("int", "float"):
            if not num(value, k == "int"):
                return f"expected {k}"
            if self.minimum is not None and value < self.minimum:
                return f"must be >= {self.minimum}"
        elif k in ("int-list", "float-list"):
            if not isinstance(value, list) or not value or not all(num(v, k == "int-list") for v in value):
                return f"expected non-empty list of {k.split('-')[0]}"
            if self.minimum is not None and min(value) < self.minimum:
                return f"entries must be >= {self.minimum}"
        elif k == "bool":
            if not isinstance(value, bool):
                return "expected bool"
        elif k == "str":
            if not isinstance(value, str) or (self.choices and value not in self.choices):
                return f"expected one of {list(self.choices)}"
        elif k == "body":
            if isinstance(value, str):
                if value not in bodies.KINDS or value == "vpoly":
                    return f"expected one of {[b for b in bodies.KINDS if b != 'vpoly']} or a body object"
            elif isinstance(value, dict):
                try:
                    bodies.body_from_config({"dim": 2, **value})
                except (ValueError, KeyError, TypeError) as exc:
                    return f"bad body object: {exc}"
            else:
                return "expected body kind or body object"
        return None


BODY_KINDS = ("cube", "cross", "ball", "simplex")


@dataclass(frozen=True)
class Experiment:
    name: str
    claim: str
    schema: dict
    guards: dict
    runner: Callable

    def validate(self, params: dict) -> dict:
        problems = {}
        for key in params:
            if key not in self.schema:
                problems[key] = "unknown parameter"
        for key, spec in self.schema.items():
            if key in params:
                msg = spec.check(params[key])
                if msg:
                    problems[key] = msg
        if problems:
            raise InvalidParamsError(json.dumps({"experiment": self.name, "problems": problems, "schema": {k: v.kind for k, v in self.schema.items()}}, indent=1))
        full = {k: v.default for k, v in self.schema.items()}
        full.update(params)
        return full


REGISTRY: dict[str, Experiment] = {}


def register(name: str, claim: str, schema: dict, guards: dict | None = None):
    def deco(fn):
        REGISTRY[name] = Experiment(name, claim, schema, guards or {}, fn)
        return fn

    return deco


def make_body(spec, n: int) -> BodySpec:
    if isinstance(spec, str):
        return bodies.body_from_config({"kind": spec, "dim": n})
    return bodies.body_from_config({"dim": n, **spec})


def _z(a: float, sa: float, b: float, sb: float) -> float:
    s = math.hypot(sa, sb)
    if s == 0:
        return 0.0 if a == b else math.copysign(math.inf, a - b)
    return (a - b) / s


def _guarded(fn: Callable, params: dict, **kw) -> dict:
    """Run one row; numerical degeneracy marks the row failed instead of aborting."""
    try:
        return fn(**kw)
    except (DegenerateInputError, RuntimeError, np.linalg.LinAlgError) as exc:
        return make_row(params, passed=False, error=f"{type(exc).__name__}: {exc}")


# ---------------------------------------------------------------- experiments


@register(
    "aleksandrov-monotonicity",
    "Q_k(K) is nonincreasing in k",
    {
        "body": Param("body", "cube"),
        "n": Param("int", 5, minimum=2),
        "m": Param("int", 5000, minimum=functionals.MIN_M),
        "sigmas": Param("float", 3.0, minimum=0),
    },
)
def _aleksandrov(p, stream, lanes):
    n = p["n"]
    K = make_body(p["body"], n)
    est = []
    for k in range(1, n + 1):
        if k == n:
            est.append(functionals.q_k(K, n, rng=stream.child(k)))
        else:
            est.append(functionals.q_k_from_volumes(parallel_volumes(lanes, K, k, p["m"], stream.child(k)), k, stream.seed))
    rows = []
    for k in range(1, n + 1):
        e = est[k - 1]
        ratios, ok = {}, True
        if k < n:
            nxt = est[k]
            ratios = {"next_over_this": nxt.value / e.value, "z_violation": _z(nxt.value, nxt.stderr, e.value, e.stderr)}
            ok = ratios["z_violation"] <= p["sigmas"]
        rows.append(make_row({"body": p["body"], "n": n, "k": k, "m": p["m"]}, {"Q": e.value}, {"Q": e.stderr}, ratios, ok))
    return rows


@register(
    "phi-deterministic",
    "c sqrt(n/k) <= Phi_[k](K) <= C sqrt(n/k) log n, measured as a ratio band",
    {
        "body": Param("body", "cross"),
        "n": Param("int", 10, minimum=2),
        "k_list": Param("int-list", [1, 2, 3, 4, 5], minimum=1),
        "m": Param("int", 2000, minimum=functionals.MIN_M),
        "rho_lo": Param("float", 0.5),
        "rho_hi": Param("float", 4.0),
    },
    guards={"rho_lo": 0.5, "rho_hi": 4.0, "rho_over_log_n_hi": 4.0},
)
def _phi_deterministic(p, stream, lanes):
    n = p["n"]
    K = make_body(p["body"], n)
    log_vol = functionals.body_log_volume(K)[0]
    rows = []
    for k in p["k_list"]:
        params = {"body": p["body"], "n": n, "k": k, "m": p["m"]}

        def one(k=k, params=params):
            if k == n:
                e = functionals.phi_k(K, k, p["m"], stream.child(k))
            else:
                vols = parallel_volumes(lanes, K, k, p["m"], stream.child(k))
                e = functionals.w_kp_from_volumes(vols, k, -n, log_vol, n=n, seed=stream.seed)
            scale = math.sqrt(n / k)
            rho = e.value / scale
            ok = p["rho_lo"] <= rho <= p["rho_hi"] and rho / math.log(n) <= 4.0
            return make_row(params, {"phi": e.value}, {"phi": e.stderr, "rho": e.stderr / scale}, {"rho": rho, "rho_over_log_n": rho / math.log(n)}, ok)

        rows.append(_guarded(one, params))
    return rows


def random_model_trial(model: str, body: BodySpec, N: int, k_list: list, m: int, L: float, stream: RngStream) -> dict:
    """One random polytope: Phi ratios per k and its volume ratios."""
    n = body.dim
    P = (models.gen_kn if model == "kn" else models.gen_mn)(body, N, stream.child(0))
    log_vol = functionals.body_log_volume(P)[0]
    rho = {}
    for k in k_list:
        if k == n:
            rho[k] = 1.0 / math.sqrt(n / k)
            continue
        vols = functionals.projection_volumes(P, k, m, stream.child(k))
        rho[k] = functionals.w_kp_from_volumes(vols, k, -n, log_vol, n=n).value / math.sqrt(n / k)
    vrad = math.exp((log_vol - bodies.log_unit_ball_volume(n)) / n)
    return {
        "rho": rho,
        "vrad_upper": vrad / (math.sqrt(math.log(N) / n) * L),
        "vol_upper": math.exp(log_vol / n) / (math.sqrt(math.log(N) / n) * L),
        "vol_lower": math.exp(log_vol / n) / (math.sqrt(math.log(2 * N / n) / n) * L),
    }


def _volume_only_trial(model: str, body: BodySpec, N: int, L: float, stream: RngStream) -> dict:
    return random_model_trial(model, body, N, [], 0, L, stream)


RANDOM_SCHEMA = {
    "body": Param("body", "cube"),
    "n": Param("int", 8, minimum=2),
    "N": Param("int", 64, minimum=3),
    "k_list": Param("int-list", [2, 4], minimum=1),
    "trials": Param("int", 50, minimum=1),
    "m": Param("int", 300, minimum=functionals.MIN_M),
    "rho_max": Param("float", 6.0),
    "freq_min": Param("float", 0.95),
}


def _isotropic(p) -> tuple[BodySpec, float, bool]:
    body = make_body(p["body"], p["n"])
    iso, data = bodies.isotropic_position(body, RngStream(0))
    return iso, data.L, data.analytic


def _random_phi(model, p, stream, lanes):
    n, N = p["n"], p["N"]
    iso, L, analytic = _isotropic(p)
    tasks = [(model, iso, N, p["k_list"], p["m"], L, stream.child(i)) for i in range(p["trials"])]
    res = lanes.map(random_model_trial, tasks)
    rows = []
    for k in p["k_list"]:
        r = np.array([t["rho"][k] for t in res])
        freq = float(np.mean(r <= p["rho_max"]))
        rows.append(
            make_row(
                {"model": model, "body": p["body"], "n": n, "N": N, "k": k, "m": p["m"], "trials": p["trials"]},
                {"frequency": freq, "rho_mean": float(r.mean()), "rho_max": float(r.max())},
                {"rho_mean": float(r.std(ddof=1) / math.sqrt(len(r))) if len(r) > 1 else 0.0},
                {"rho": float(r.mean())},
                freq >= p["freq_min"],
            )
        )
    if model == "mn":
        v = np.array([t["vrad_upper"] for t in res])
        freq = float(np.mean(v <= p["rho_max"]))
        rows.append(
            make_row(
                {"model": model, "body": p["body"], "n": n, "N": N, "trials": p["trials"], "quantity": "vrad_upper"},
                {"frequency": freq, "ratio_mean": float(v.mean()), "ratio_max": float(v.max())},
                passed=freq >= p["freq_min"],
                kind="volume",
            )
        )
    return rows


@register(
    "phi-kn",
    "Phi_[k](K_N) <= c sqrt(n/k) with high probability, uniform points in an isotropic body",
    RANDOM_SCHEMA,
    guards={"rho_max": 6.0, "freq_min": 0.95},
)
def _phi_kn(p, stream, lanes):
    return _random_phi("kn", p, stream, lanes)


@register(
    "phi-mn",
    "Phi_[k](M_N) <= c sqrt(n/k) with high probability, cone-measure points",
    RANDOM_SCHEMA,
    guards={"rho_max": 6.0, "freq_min": 0.95},
)
def _phi_mn(p, stream, lanes):
    return _random_phi("mn", p, stream, lanes)


def beta_phi_trial(n: int, beta: float, N: int, k_list: list, m: int, stream: RngStream) -> dict:
    P = models.gen_beta(n, beta, N, stream.child(0))
    log_vol = functionals.body_log_volume(P)[0]
    out = {}
    for k in k_list:
        vols = functionals.projection_volumes(P, k, m, stream.child(k))
        out[k] = functionals.w_kp_from_volumes(vols, k, -n, log_vol, n=n).value / math.sqrt(n / k)
    return out


@register(
    "phi-beta",
    "Phi_[k](P^beta_{N,n}) <= c sqrt(n/k) with probability 1 - e^{-k} once k clears a log threshold",
    {
        "n": Param("int", 6, minimum=2),
        "beta": Param("float", 0.0, minimum=-0.999999),
        "N": Param("int", 200, minimum=3),
        "k_list": Param("int-list", [3, 4], minimum=1),
        "trials": Param("int", 20, minimum=1),
        "m": Param("int", 200, minimum=functionals.MIN_M),
        "rho_max": Param("float", 6.0),
    },
    guards={"rho_max": 6.0},
)
def _phi_beta(p, stream, lanes):
    n, beta = p["n"], p["beta"]
    threshold = math.log(n * (1 + math.log(4 * math.sqrt(beta + n / 2 + 1))))
    res = lanes.map(beta_phi_trial, [(n, beta, p["N"], p["k_list"], p["m"], stream.child(i)) for i in range(p["trials"])])
    rows = []
    for k in p["k_list"]:
        r = np.array([t[k] for t in res])
        freq = float(np.mean(r <= p["rho_max"]))
        target = 1 - math.exp(-k)
        rows.append(
            make_row(
                {"n": n, "beta": beta, "N": p["N"], "k": k, "m": p["m"], "trials": p["trials"], "k_threshold": threshold},
                {"frequency": freq, "rho_mean": float(r.mean()), "rho_max": float(r.max())},
                ratios={"rho": float(r.mean())},
                # the high-probability bound needs astronomically large N; the frequency is recorded, and only
                # judged when k clears the threshold
                passed=(k < threshold) or freq >= target - 3 * math.sqrt(target * (1 - target) / len(r)) - 1e-12,
            )
        )
    return rows


def kubota_chunk(n: int, k: int, beta: float, N: int, stream: RngStream, lo: int, hi: int) -> np.ndarray:
    return np.array([models.kubota_trial(n, k, beta, N, stream.child(i)) for i in range(lo, hi)])


@register(
    "kubota-identity",
    "E int vol_k(P_F P^beta_{N,n}) = E vol_k(P^{beta+(n-k)/2}_{N,k})",
    {
        "n": Param("int", 4, minimum=1),
        "k": Param("int", 2, minimum=1),
        "beta": Param("float", 0.0, minimum=-0.999999),
        "N": Param("int", 12, minimum=2),
        "trials": Param("int", 10000, minimum=2),
        "batches": Param("int", 10, minimum=1),
        "sigmas": Param("float", 3.0, minimum=0),
    },
    guards={"sigmas": 3.0},
)
def _kubota(p, stream, lanes):
    n, k, beta, N, T = p["n"], p["k"], p["beta"], p["N"], p["trials"]
    if k > n or k > hulls.MAX_EXACT_DIM or N < n + 1:
        raise InvalidParamsError(json.dumps({"problems": {"k": "need k <= n, k <= 8 and N >= n + 1"}}))
    tasks = [(n, k, beta, N, stream, lo, min(lo + CHUNK, T)) for lo in range(0, T, CHUNK)]
    pairs = np.vstack(lanes.map(kubota_chunk, tasks))
    lhs, rhs = models.summarize_pairs(pairs, stream.seed)
    z = _z(lhs.value, lhs.stderr, rhs.value, rhs.stderr)
    params = {"n": n, "k": k, "beta": beta, "N": N, "trials": T}
    rows = [make_row(params, {"lhs": lhs.value, "rhs": rhs.value}, {"lhs": lhs.stderr, "rhs": rhs.stderr}, {"z": z}, abs(z) <= p["sigmas"], kind="summary")]
    edges = np.linspace(0, T, p["batches"] + 1).astype(int)[1:]
    for b, hi in enumerate(edges):
        rows.append(make_row({**params, "batch": b + 1, "trials_used": int(hi)}, {"lhs": float(pairs[:hi, 0].mean()), "rhs": float(pairs[:hi, 1].mean())}, kind="batch"))
    return rows


@register(
    "beta-marginal",
    "P(<X, e_1> < d) = 1 - B(d) and |X|^2 ~ Beta(n/2, beta+1)",
    {
        "n": Param("int", 5, minimum=1),
        "beta": Param("float", 2.0, minimum=-0.999999),
        "d_list": Param("float-list", [0.1, 0.3, 0.6]),
        "samples": Param("int", 100_000, minimum=10),
        "ks_samples": Param("int", 10_000, minimum=10),
        "sigmas": Param("float", 3.0),
        "ks_alpha": Param("float", 0.01),
    },
    guards={"sigmas": 3.0, "ks_alpha": 0.01},
)
def _beta_marginal(p, stream, lanes):
    n, beta, m = p["n"], p["beta"], p["samples"]
    X = sample_beta(n, beta, stream.child(0), m)
    rows = []
    for d in p["d_list"]:
        target = 1.0 - models.beta_B(d, n, beta)
        freq = float(np.mean(X[:, 0] < d))
        se = math.sqrt(target * (1 - target) / m)
        z = _z(freq, se, target, 0.0)
        rows.append(make_row({"n": n, "beta": beta, "d": d, "samples": m}, {"frequency": freq, "target": target}, {"frequency": se}, {"z": z}, abs(z) <= p["sigmas"]))
    r2 = np.sum(sample_beta(n, beta, stream.child(1), p["ks_samples"]) ** 2, axis=1)
    ks = stats.kstest(r2, stats.beta(n / 2.0, beta + 1.0).cdf)
    rows.append(make_row({"n": n, "beta": beta, "samples": p["ks_samples"]}, {"ks_statistic": float(ks.statistic), "p_value": float(ks.pvalue)}, passed=ks.pvalue >= p["ks_alpha"], kind="radial-ks"))
    return rows


@register(
    "beta-bounds",
    "closed-form lower and upper bounds sandwich B(d) on (0, 1)",
    {
        "n_list": Param("int-list", [3, 5, 8], minimum=1),
        "beta_list": Param("float-list", [-0.5, 0.0, 2.0], minimum=-0.999999),
        "grid": Param("int", 99, minimum=1),
    },
)
def _beta_bounds(p, stream, lanes):
    rows = []
    ds = np.arange(1, p["grid"] + 1) / (p["grid"] + 1)
    for n in p["n_list"]:
        for beta in p["beta_list"]:
            lo_gap, hi_gap, bad = math.inf, math.inf, 0
            for d in ds:
                lo, hi = models.beta_B_bounds(float(d), n, beta)
                B = models.beta_B(float(d), n, beta)
                bad += not (lo < B < hi)
                lo_gap = min(lo_gap, (B - lo) / B)
                hi_gap = min(hi_gap, (hi - B) / B)
            rows.append(make_row({"n": n, "beta": beta, "grid": p["grid"]}, {"violations": bad}, ratios={"min_rel_gap_lower": lo_gap, "min_rel_gap_upper": hi_gap}, passed=bad == 0))
    return rows


@register(
    "cone-moment",
    "n/(n+q) E_{mu_K} |<x, xi>|^q = h_{Z_q(K)}(xi)^q",
    {
        "body": Param("body", "cube"),
        "n": Param("int", 3, minimum=1),
        "q": Param("float", 2.0, minimum=1),
        "samples": Param("int", 100_000, minimum=100),
        "sigmas": Param("float", 3.0),
    },
    guards={"sigmas": 3.0},
)
def _cone_moment(p, stream, lanes):
    n, q, m = p["n"], p["q"], p["samples"]
    K = make_body(p["body"], n)
    if abs(bodies.volume(K) - 1.0) > 1e-9:
        K, _ = bodies.isotropic_position(K, RngStream(0))
    x = sample_cone(K, stream.child(0), m)
    vals = n / (n + q) * np.abs(x[:, 0]) ** q
    est, se = float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(m))
    if K.kind == "cube" and K.linear_map is None:
        target, tse = 0.5**q / (q + 1), 0.0
    else:
        u = np.abs(sample_uniform(K, stream.child(1), m)[:, 0]) ** q
        target, tse = float(u.mean()), float(u.std(ddof=1) / math.sqrt(m))
    z = _z(est, se, target, tse)
    return [make_row({"body": p["body"], "n": n, "q": q, "samples": m}, {"cone_side": est, "target": target}, {"cone_side": se, "target": tse}, {"z": z}, abs(z) <= p["sigmas"])]


@register(
    "vrad-mn-upper",
    "vrad(M_N) <= c sqrt(log N / n) L_K with high probability",
    {k: v for k, v in RANDOM_SCHEMA.items() if k not in ("k_list", "m")},
    guards={"rho_max": 6.0, "freq_min": 0.95},
)
def _vrad_mn(p, stream, lanes):
    iso, L, _ = _isotropic(p)
    res = lanes.map(_volume_only_trial, [("mn", iso, p["N"], L, stream.child(i)) for i in range(p["trials"])])
    rows = []
    for q in ("vrad_upper", "vol_upper"):
        v = np.array([t[q] for t in res])
        freq = float(np.mean(v <= p["rho_max"]))
        rows.append(make_row({"body": p["body"], "n": p["n"], "N": p["N"], "trials": p["trials"], "quantity": q}, {"frequency": freq, "ratio_mean": float(v.mean()), "ratio_max": float(v.max())}, passed=freq >= p["freq_min"]))
    return rows


@register(
    "kn-volume-lower",
    "vol_n(K_N)^{1/n} >= c sqrt(log(2N/n)/n) L_K with high probability",
    {
        **{k: v for k, v in RANDOM_SCHEMA.items() if k not in ("k_list", "m", "rho_max", "freq_min")},
        "ratio_min": Param("float", 0.3),
    },
    guards={"ratio_min": 0.3},
)
def _kn_volume(p, stream, lanes):
    iso, L, _ = _isotropic(p)
    res = lanes.map(_volume_only_trial, [("kn", iso, p["N"], L, stream.child(i)) for i in range(p["trials"])])
    v = np.array([t["vol_lower"] for t in res])
    return [make_row({"body": p["body"], "n": p["n"], "N": p["N"], "trials": p["trials"]}, {"ratio_min": float(v.min()), "ratio_mean": float(v.mean())}, passed=bool(v.min() >= p["ratio_min"]))]


@register(
    "cross-partition",
    "the block-partition subspace has vol_k(P_F B_1^n) = 2^k/k! prod m_i^{-1/2}",
    {
        "n_max": Param("int", 16, minimum=1),
        "k_max": Param("int", 5, minimum=1),
        "rtol": Param("float", 1e-9),
    },
    guards={"rtol": 1e-9},
)
def _cross_partition(p, stream, lanes):
    rows = []
    for n in range(1, p["n_max"] + 1):
        for k in range(1, min(n, p["k_max"]) + 1):
            F, exact = models.cross_partition_subspace(n, k)
            hull = models.cross_projection_volume(F)
            rel = abs(hull - exact) / exact
            scaled = exact ** (1 / k) * math.sqrt(k * n)
            # block sizes are >= n/(2k), which caps the scaled root volume
            bound = (2.0**k / math.factorial(k)) ** (1 / k) * math.sqrt(2) * k
            ratios = {"rel_err": rel, "scaled": scaled, "scaled_bound": bound}
            rows.append(make_row({"n": n, "k": k}, {"closed_form": exact, "hull": hull}, ratios=ratios, passed=rel <= p["rtol"] and scaled <= bound * (1 + 1e-12)))
    return rows


def _tail_chunk(n, k, stream, lo, hi):
    return np.array([models.cross_tail_ratio(n, k, stream.child(i)) for i in range(lo, hi)])


@register(
    "cross-tail",
    "vol_k(P_F B_1^n)^{1/k} <= C sqrt(log(1+n/k)/(kn)) for most F once k >= log n",
    {
        "n": Param("int", 16, minimum=1),
        "k": Param("int", 4, minimum=1),
        "draws": Param("int", 500, minimum=1),
        "c_guard": Param("float", models.C_GUARD),
        "freq_min": Param("float", 0.95),
    },
    guards={"c_guard": models.C_GUARD, "freq_min": 0.95},
)
def _cross_tail(p, stream, lanes):
    n, k, D = p["n"], p["k"], p["draws"]
    r = np.concatenate(lanes.map(_tail_chunk, [(n, k, stream, lo, min(lo + CHUNK, D)) for lo in range(0, D, CHUNK)]))
    freq = float(np.mean(r <= p["c_guard"]))
    q05, q50, q95 = (float(x) for x in np.percentile(r, [5, 50, 95]))
    return [make_row({"n": n, "k": k, "draws": D, "c_guard": p["c_guard"], "k_ge_log_n": k >= math.log(n)}, {"frequency": freq, "ratio_q05": q05, "ratio_median": q50, "ratio_q95": q95}, passed=freq >= p["freq_min"])]


@register(
    "subspace-stability",
    "d(E, F_0) <= 1/sqrt(n) implies P_E B_1^n has volume at most 3^k that of P_{F_0} B_1^n",
    {
        "n": Param("int", 12, minimum=2),
        "k": Param("int", 3, minimum=1),
        "eps": Param("float", -1.0),
        "trials": Param("int", 100, minimum=1),
    },
)
def _stability(p, stream, lanes):
    n, k = p["n"], p["k"]
    eps = p["eps"] if p["eps"] > 0 else 1.0 / math.sqrt(n)
    res = np.array(lanes.map(models.stability_trial, [(n, k, eps, stream.child(i)) for i in range(p["trials"])]))
    ratio = res[:, 0] / (3.0**k * res[:, 1])
    return [
        make_row(
            {"n": n, "k": k, "eps": eps, "trials": p["trials"]},
            {"max_volume_ratio": float(ratio.max()), "max_sigma_inf": float(res[:, 2].max()), "violations": int(np.sum(ratio > 1))},
            ratios={"max_vol_E_over_vol_F0": float((res[:, 0] / res[:, 1]).max())},
            passed=bool(np.all(ratio <= 1)) and bool(np.all(res[:, 2] <= eps * (1 + 1e-9))),
        )
    ]


def _jl_chunk(n, k, stream, lo, hi):
    return np.array([models.jl_max_norm(n, k, stream.child(i)) for i in range(lo, hi)])


@register(
    "jl-check",
    "max_j |P_F e_j| <= (1+eps) sqrt(k/n) for most Haar F",
    {
        "n": Param("int", 16, minimum=1),
        "k": Param("int", 8, minimum=1),
        "eps": Param("float", 1.0, minimum=0),
        "draws": Param("int", 200, minimum=1),
        "freq_min": Param("float", 0.9),
    },
    guards={"freq_min": 0.9},
)
def _jl(p, stream, lanes):
    n, k, D = p["n"], p["k"], p["draws"]
    norms = np.concatenate(lanes.map(_jl_chunk, [(n, k, stream, lo, min(lo + CHUNK, D)) for lo in range(0, D, CHUNK)]))
    freq = float(np.mean(norms <= (1 + p["eps"]) * math.sqrt(k / n) * (1 + 1e-12)))
    return [make_row({"n": n, "k": k, "eps": p["eps"], "draws": D, "union_bound_ok": n < math.exp(p["eps"] ** 2 * k / 16)}, {"frequency": freq, "max_norm_median": float(np.median(norms))}, passed=freq >= p["freq_min"])]


@register(
    "w-kp-cross",
    "W_[k,-p](B_1^n) sqrt(k/n) decreases in p towards a bounded plateau",
    {
        "n": Param("int", 10, minimum=2),
        "k": Param("int", 3, minimum=1),
        "p_list": Param("float-list", [1.0, 5.0, 20.0, 80.0]),
        "m": Param("int", 2000, minimum=functionals.MIN_M),
        "plateau_max": Param("float", 4.0),
    },
    guards={"plateau_max": 4.0},
)
def _wkp_cross(p, stream, lanes):
    n, k = p["n"], p["k"]
    K = bodies.cross_polytope(n)
    log_vol = functionals.body_log_volume(K)[0]
    vols = parallel_volumes(lanes, K, k, p["m"], stream.child(k))
    rows, prev = [], math.inf
    for q in sorted(p["p_list"]):
        e = functionals.w_kp_from_volumes(vols, k, -q, log_vol, n=n, seed=stream.seed)
        scaled = e.value * math.sqrt(k / n)
        ok = scaled <= prev and scaled <= p["plateau_max"]
        rows.append(make_row({"n": n, "k": k, "p": q, "m": p["m"]}, {"W": e.value}, {"W": e.stderr}, {"scaled": scaled}, ok))
        prev = scaled
    return rows


@register(
    "santalo-check",
    "vol(B_1^n) vol(B_inf^n) = 4^n/n! <= omega_n^2",
    {"n_max": Param("int", 12, minimum=1)},
)
def _santalo(p, stream, lanes):
    rows = []
    for n in range(1, p["n_max"] + 1):
        lhs = bodies.volume(bodies.cross_polytope(n)) * bodies.volume(bodies.cube(n, 2.0))
        rhs = bodies.unit_ball_volume(n) ** 2
        rows.append(make_row({"n": n}, {"product": lhs, "omega_n_squared": rhs}, ratios={"ratio": lhs / rhs}, passed=lhs <= rhs))
    return rows


@register(
    "zq-monotone",
    "Z_p(K) is contained in Z_q(K) for p <= q, and Z_2(K) = L_K B_2^n for isotropic K",
    {
        "body": Param("body", "cube"),
        "n": Param("int", 4, minimum=1),
        "q_list": Param("float-list", [1.0, 2.0, 3.0, 4.0, 6.0, 8.0], minimum=1),
        "m": Param("int", 100_000, minimum=functionals.MIN_M),
        "sigmas": Param("float", 3.0),
    },
    guards={"sigmas": 3.0},
)
def _zq(p, stream, lanes):
    n = p["n"]
    iso, data = bodies.isotropic_position(make_body(p["body"], n), RngStream(0))
    xi = np.zeros(n)
    xi[0] = 1.0
    qs = sorted(p["q_list"])
    est = functionals.zq_support_curve(iso, qs, xi, p["m"], stream.child(0))
    rows, prev = [], -math.inf
    for q, e in zip(qs, est):
        ok = e.value >= prev
        ratios = {}
        if q == 2:
            z = _z(e.value, e.stderr, data.L, 0.0)
            ratios = {"z_vs_L": z}
            ok = ok and abs(z) <= p["sigmas"]
        rows.append(make_row({"body": p["body"], "n": n, "q": q, "m": p["m"]}, {"h_Zq": e.value, "L": data.L}, {"h_Zq": e.stderr}, ratios, ok))
        prev = e.value
    return rows


@register(
    "iq-ratio",
    "I_{-q}(K) and I_q(K) are both of order sqrt(n) L_K for small q",
    {
        "body": Param("body", "cube"),
        "n": Param("int", 9, minimum=1),
        "q_list": Param("float-list", [1.0, 2.0, 3.0]),
        "m": Param("int", 100_000, minimum=functionals.MIN_M),
        "band_lo": Param("float", 0.5),
        "band_hi": Param("float", 2.0),
        "sigmas": Param("float", 3.0),
    },
    guards={"band_lo": 0.5, "band_hi": 2.0, "sigmas": 3.0},
)
def _iq(p, stream, lanes):
    n = p["n"]
    iso, data = bodies.isotropic_position(make_body(p["body"], n), RngStream(0))
    qs = sorted(p["q_list"])
    allq = qs + [-q for q in qs]
    est = dict(zip(allq, functionals.i_q_curve(iso, allq, p["m"], stream.child(0))))
    ref = math.sqrt(n) * data.L
    rows = []
    for q in qs:
        pos, neg = est[q], est[-q]
        ratio = neg.value / pos.value
        ok = p["band_lo"] <= ratio <= p["band_hi"]
        ratios = {"neg_over_pos": ratio, "pos_over_sqrt_n_L": pos.value / ref}
        if q == 2:
            ratios["z_I2"] = _z(pos.value, pos.stderr, ref, 0.0)
            ok = ok and abs(ratios["z_I2"]) <= p["sigmas"]
        rows.append(make_row({"body": p["body"], "n": n, "q": q, "m": p["m"]}, {"I_q": pos.value, "I_minus_q": neg.value}, {"I_q": pos.stderr, "I_minus_q": neg.stderr}, ratios, ok))
    return rows


# ---------------------------------------------------------------- driver


def get_experiment(name: str) -> Experiment:
    if name not in REGISTRY:
        raise UnknownExperimentError(name)
    return REGISTRY[name]


def run(config: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Validate, execute and (optionally) write one experiment.

    Invalid parameters raise before any computation.  ``report.json`` holds
    only config-determined content; timing and worker count go to
    ``run.json`` next to it so reruns compare byte for byte.
    """
    import time

    exp = get_experiment(config.name)
    params = exp.validate(config.params)
    stream = RngStream(config.seed)
    t0 = time.perf_counter()
    with Lanes(config.workers) as lanes:
        rows = exp.runner(params, stream, lanes)
    wall = time.perf_counter() - t0
    meta = {
        "experiment": exp.name,
        "claim": exp.claim,
        "seed": config.seed,
        "params": params,
        "guards": {**exp.guards, **{k: params[k] for k in exp.guards if k in params}},
        "version": __version__,
        "csv_schema": CSV_SCHEMA,
    }
    report = ExperimentReport(rows, meta)
    if write:
        report.write(config.output_dir)
        with open(os.path.join(config.output_dir, "run.json"), "w") as fh:
            json.dump({"workers": config.workers, "wall_time": wall, "failed_rows": sum(not r["pass"] for r in rows)}, fh, indent=1)
            fh.write("\n")
    return report


def registry_listing() -> str:
    width = max(len(n) for n in REGISTRY)
    return "\n".join(f"{name:<{width}}  {exp.claim}" for name, exp in REGISTRY.items())


# ---------------------------------------------------------------- plot data

PLOT_KINDS = {
    # kind: (default x column, y columns, optional error column)
    "ratio-vs-k": ("params.k", ["ratios.rho"], "stderrs.rho"),
    "estimate-vs-n": ("params.n", None, None),
    "frequency-vs-param": (None, ["estimates.frequency"], None),
}


class PlotDataError(ValueError):
    pass


def _lookup(row: dict, column: str):
    section, _, key = column.partition(".")
    if not key:
        return row.get(section)
    return row.get(section, {}).get(key)


def emit_plotdata(report: ExperimentReport, kind: str, out_dir: str, x: str | None = None) -> tuple[str, str]:
    """Write whitespace-separated columns plus a JSON manifest describing them.

    Returns the paths of the data file and the manifest.  Kubota batch rows,
    when present, are plotted as (trials used, lhs, rhs).
    """
    if kind not in PLOT_KINDS:
        raise PlotDataError(f"unknown plot kind {kind!r}; expected one of {sorted(PLOT_KINDS)}")
    rows = report.rows
    if not rows:
        raise PlotDataError("report has no rows")
    x_default, ys, err = PLOT_KINDS[kind]
    if kind == "estimate-vs-n":
        batch = [r for r in rows if r["kind"] == "batch"]
        if batch:
            rows, x_default = batch, "params.trials_used"
        keys = [k for k in rows[0]["estimates"]]
        ys = [f"estimates.{k}" for k in keys[:2]]
    else:
        rows = [r for r in rows if r["kind"] == "result"] or rows
    if x is None and x_default is None:
        varying = [k for k in rows[0]["params"] if len({json.dumps(_clean(r["params"].get(k))) for r in rows}) > 1]
        x_default = f"params.{varying[0]}" if varying else f"params.{next(iter(rows[0]['params']))}"
    xcol = x or x_default
    cols = [xcol] + list(ys)
    missing = sorted({c for c in cols for r in rows if _lookup(r, c) is None})
    if not ys or missing:
        raise PlotDataError(f"report lacks columns required by {kind}: {missing or ['estimates.*']}")
    if err is not None and all(_lookup(r, err) is not None for r in rows):
        cols.append(err)

    name = report.meta.get("experiment", "report")
    os.makedirs(out_dir, exist_ok=True)
    stem = f"{name}.{kind}"
    data_path = os.path.join(out_dir, stem + ".dat")
    with open(data_path, "w") as fh:
        fh.write("# " + " ".join(cols) + "\n")
        for r in rows:
            fh.write(" ".join(repr(float(_lookup(r, c))) for c in cols) + "\n")
    manifest = {
        "experiment": name,
        "kind": kind,
        "data_file": os.path.basename(data_path),
        "columns": cols,
        "axes": {"x": {"column": 1, "label": xcol.split(".")[-1]}, "y": {"label": ", ".join(c.split(".")[-1] for c in ys)}},
        "series": [{"label": c.split(".")[-1], "x": 1, "y": i + 2, **({"yerr": len(cols)} if err in cols and i == 0 else {})} for i, c in enumerate(ys)],
        "seed": report.meta.get("seed"),
    }
    manifest_path = os.path.join(out_dir, stem + ".json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return data_path, manifest_path


# ---------------------------------------------------------------- selfcheck


def _selfcheck_cases() -> list[tuple[str, Callable[[], tuple[float, float, float]]]]:
    # each case returns (value, expected, tolerance); modules are looked up at
    # call time so patched attributes are what gets checked
    from scipy import special

    from . import numerics, sampling

    def omega_table():
        # omega_2 = pi, omega_3 = 4 pi / 3 and omega_n = 2 pi / n * omega_{n-2}
        worst = max(abs(bodies.unit_ball_volume(2) - math.pi), abs(bodies.unit_ball_volume(3) - 4 * math.pi / 3))
        for n in range(3, 16):
            worst = max(worst, abs(bodies.unit_ball_volume(n) - 2 * math.pi / n * bodies.unit_ball_volume(n - 2)))
        return worst, 0.0, 1e-12

    def ball_phi():
        return functionals.phi_k(bodies.ball(4), 2, m=functionals.MIN_M, rng=0).value, 2**0.25, 1e-10

    def santalo():
        bad = sum(4.0**n / math.factorial(n) > bodies.unit_ball_volume(n) ** 2 for n in range(1, 13))
        return float(bad), 0.0, 0.0

    def cross_volume():
        return max(abs(bodies.volume(bodies.cross_polytope(n)) * math.factorial(n) / 2**n - 1) for n in range(1, 13)), 0.0, 1e-12

    def partition():
        F, _ = models.cross_partition_subspace(10, 2)
        return models.cross_projection_volume(F), 0.4, 4e-10

    def hull_cube():
        V = np.array(np.meshgrid(*[[0.0, 1.0]] * 4)).reshape(4, -1).T
        a = hulls.hull_volume(V)
        b = hulls.hull_volume(V, method="beneath-beyond", seed=0)
        return max(abs(a - 1), abs(b - 1)), 0.0, 1e-12

    def zonotope_full():
        F = sampling.sample_grassmannian(5, 5, RngStream(3))
        return hulls.zonotope_projection_volume(F, 1.0), 1.0, 1e-10

    def beta_oracle():
        worst = 0.0
        for n, beta in ((5, 2.0), (3, 0.0), (8, -0.5)):
            for d in (0.1, 0.3, 0.6, 0.9):
                ref = 0.5 * special.betainc(beta + (n + 1) / 2, 0.5, 1 - d * d)
                worst = max(worst, abs(models.beta_B(d, n, beta) - ref))
        return worst, 0.0, 1e-10

    def beta_bounds():
        bad = 0
        for n, beta in ((5, 2.0), (3, 0.0), (8, -0.5)):
            for d in np.arange(1, 100) / 100:
                lo, hi = models.beta_B_bounds(float(d), n, beta)
                bad += not (lo < models.beta_B(float(d), n, beta) < hi)
        return float(bad), 0.0, 0.0

    def log_gamma():
        return numerics.log_gamma(0.5), 0.5 * math.log(math.pi), 1e-12

    def determinant():
        A = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]])
        return numerics.determinant(A), 18.0, 1e-12

    def rng_repeat():
        a = RngStream(11).child(5).generator().standard_normal(8)
        b = RngStream(11).child(5).generator().standard_normal(8)
        return float(np.max(np.abs(a - b))), 0.0, 0.0

    def cone_cube():
        # each facet of the unit cube carries cone mass 1/(2n); x_1 = +-1/2 on two
        # of them and is uniform on [-1/2, 1/2] on the rest
        n = 3
        e = 0.25 / n + (1 - 1 / n) / 12
        return n / (n + 2) * e, 1.0 / 12.0, 1e-15

    return [
        ("omega table recurrence", omega_table),
        ("Phi_[2](B_2^4) = 2^(1/4)", ball_phi),
        ("Santalo 4^n/n! <= omega_n^2, n<=12", santalo),
        ("vol(B_1^n) = 2^n/n!", cross_volume),
        ("partition subspace n=10 k=2", partition),
        ("unit cube hull volume (two methods)", hull_cube),
        ("zonotope of full-rank projection", zonotope_full),
        ("B(d) quadrature vs betainc", beta_oracle),
        ("B(d) bounds sandwich", beta_bounds),
        ("log Gamma(1/2)", log_gamma),
        ("LU determinant", determinant),
        ("RNG stream replay", rng_repeat),
        ("cube cone moment q=2, n=3", cone_cube),
    ]


def selfcheck() -> tuple[bool, str]:
    """Fast deterministic invariant table; returns (all passed, table text)."""
    lines = [f"{'check':<40} {'value':>22} {'expected':>22}  status"]
    ok_all = True
    for name, case in _selfcheck_cases():
        try:
            value, expected, tol = case()
            ok = tol >= 0 and abs(value - expected) <= tol
            lines.append(f"{name:<40} {value:>22.15g} {expected:>22.15g}  {'PASS' if ok else 'FAIL'}")
        except Exception as exc:  # a crash is a named failure, not an abort
            ok = False
            lines.append(f"{name:<40} {type(exc).__name__:>22} {'':>22}  FAIL")
        ok_all &= ok
    lines.append(f"selfcheck: {'PASS' if ok_all else 'FAIL'}")
    return ok_all, "\n".join(lines) + "\n"
