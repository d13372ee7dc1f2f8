"""Flat key-value experiment configs and per-problem defaults.

The config format is plain text: one ``key = value`` pair per line, ``#``
comments, dotted section keys (``sampler.step_vcm = 1e5``).  Values stay
strings until a typed accessor parses them, so files are hand-editable and
diff-friendly.  Validation is total: every invalid entry is reported with its
field name; nothing fails mid-run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .prox import AdamParams, CGParams, PDHGParams
from .regularizers import TVWeights
from .samplers import DEFAULT_ICM_TIMESTEPS, DEFAULT_VCM_TIMESTEPS, SamplerConfig, VisionXLConfig


class ConfigError(ValueError):
    """Config validation failure; message lists field-addressed problems."""


# Benchmark hyperparameters per problem: TV weights and the two step sizes.
# Values are kept as strings, exactly as shipped in configs/problem_*.cfg.
PROBLEM_DEFAULTS = {
    "A": {"tv.lambda_h": "0", "tv.lambda_v": "0", "tv.lambda_t": "0.005",
          "sampler.step_vcm": "1e5", "sampler.step_icm": "1e5"},
    "B": {"tv.lambda_h": "0", "tv.lambda_v": "0", "tv.lambda_t": "0",
          "sampler.step_vcm": "1e5", "sampler.step_icm": "2e3"},
    "C": {"tv.lambda_h": "1e-4", "tv.lambda_v": "1e-4", "tv.lambda_t": "1e-6",
          "sampler.step_vcm": "1e5", "sampler.step_icm": "1e5"},
}

PROBLEM_OPERATORS = {
    "A": "temporal-pool:4,spatial-pool:4",
    "B": "temporal-circ-blur:7,spatial-pool:8",
    "C": "temporal-pool:8,spatial-pool:8",
}

SAMPLERS = ("latino", "latino-v", "latino-image", "vision-xl", "admm-tv")
PRIOR_BINDINGS = ("builtin:gaussian", "builtin:smoothing", "builtin:identity")


def parse_kv(text: str, source: str = "<config>") -> dict:
    """Parse the flat key-value format into an ordered dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def read_kv(path) -> dict:
    path = Path(path)
    return parse_kv(path.read_text(), source=str(path))


def write_kv(entries: dict, path, header: str = "") -> None:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.extend(f"{k} = {v}" for k, v in entries.items())
    Path(path).write_text("\n".join(lines) + "\n")


class _Fields:
    """Typed accessors that accumulate field-addressed errors."""

    def __init__(self, entries: dict):
        self.entries = dict(entries)
        self.errors = []
        self.used = set()

    def _raw(self, key, default):
        self.used.add(key)
        return self.entries.get(key, default)

    def str_(self, key, default=None, choices=None, required=False):
        v = self._raw(key, default)
        if v is None:
            if required:
                self.errors.append(f"{key}: required key missing")
            return default
        if choices and v not in choices:
            self.errors.append(f"{key}: {v!r} not one of {sorted(choices)}")
        return v

    def float_(self, key, default=None, minimum=None):
        v = self._raw(key, None)
        if v is None:
            return default
        try:
            f = float(v)
        except ValueError:
            self.errors.append(f"{key}: {v!r} is not a number")
            return default
        if minimum is not None and f < minimum:
            self.errors.append(f"{key}: {f} below minimum {minimum}")
        return f

    def int_(self, key, default=None, minimum=None):
        v = self._raw(key, None)
        if v is None:
            return default
        try:
            i = int(v)
        except ValueError:
            self.errors.append(f"{key}: {v!r} is not an integer")
            return default
        if minimum is not None and i < minimum:
            self.errors.append(f"{key}: {i} below minimum {minimum}")
        return i

    def int_list(self, key, default):
        v = self._raw(key, None)
        if v is None:
            return tuple(default)
        try:
            return tuple(int(part.strip()) for part in v.split(",") if part.strip())
        except ValueError:
            self.errors.append(f"{key}: {v!r} is not a comma-separated integer list")
            return tuple(default)


@dataclass
class ExperimentConfig:
    problem: str = "A"
    operator_spec: str = ""
    sigma_n: float = 1e-3
    noise_seed: int = 0
    sampler: str = "latino-v"
    sampler_cfg: SamplerConfig = field(default_factory=SamplerConfig)
    vxl: VisionXLConfig = field(default_factory=VisionXLConfig)
    admm_rho: float = 1.0
    admm_iters: int = 50
    prior_vcm: str = "builtin:smoothing"
    prior_icm: str = "builtin:smoothing"
    input_path: str = ""
    output_dir: str = "out"
    init_file: str = ""
    reference_path: str = ""
    metrics_enabled: bool = True
    raw_entries: dict = field(default_factory=dict)


def _prior_binding_ok(value: str) -> bool:
    return value in PRIOR_BINDINGS or value.startswith("external:")


def load_experiment_config(entries: dict, check_paths: bool = True) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from parsed key-value entries."""
    f = _Fields(entries)

    problem = f.str_("problem", "A", choices={"A", "B", "C", "custom"})
    if problem == "custom":
        op_spec = f.str_("operator.stages", None)
        if not op_spec:
            f.errors.append("operator.stages: required for problem = custom")
            op_spec = "identity"
    else:
        op_spec = f._raw("operator.stages", PROBLEM_OPERATORS.get(problem, "identity"))

    defaults = PROBLEM_DEFAULTS.get(problem, PROBLEM_DEFAULTS["A"])
    merged = dict(defaults)
    merged.update(entries)
    f.entries = merged

    sampler = f.str_("sampler.kind", "latino-v", choices=set(SAMPLERS))
    sigma_n = f.float_("noise.sigma_n", 1e-3, minimum=0.0)
    noise_seed = f.int_("noise.seed", 0)

    lam_h = f.float_("tv.lambda_h", 0.0, minimum=0.0)
    lam_v = f.float_("tv.lambda_v", 0.0, minimum=0.0)
    lam_t = f.float_("tv.lambda_t", 0.0, minimum=0.0)
    tv_solver = f.str_("tv.solver", None, choices={"pdhg", "adam"})
    if tv_solver is None:
        tv_solver = "pdhg" if (lam_h == 0.0 and lam_v == 0.0) else "adam"
    elif tv_solver == "pdhg" and (lam_h or lam_v):
        f.errors.append("tv.solver: pdhg handles pure temporal TV only; use adam for spatial weights")

    step_vcm = f.float_("sampler.step_vcm", 1e5)
    step_icm = f.float_("sampler.step_icm", 1e5)
    vcm_ts = f.int_list("sampler.vcm_timesteps", DEFAULT_VCM_TIMESTEPS)
    icm_ts = f.int_list("sampler.icm_timesteps", DEFAULT_ICM_TIMESTEPS)
    seed = f.int_("sampler.seed", 0)
    init = f.str_("sampler.init", "pseudo-inverse", choices={"pseudo-inverse", "file"})
    init_file = f.str_("sampler.init_file", "")

    cg = CGParams(max_iters=f.int_("cg.iters", 10, minimum=1) or 10,
                  tol=f.float_("cg.tol", 1e-6, minimum=0.0) or 1e-6)
    pdhg = PDHGParams(iters=f.int_("pdhg.iters", 200, minimum=1) or 200)
    adam = AdamParams(lr=f.float_("adam.lr", 1e-3) or 1e-3,
                      iters=f.int_("adam.iters", 100, minimum=1) or 100)

    prior_vcm = f.str_("prior.vcm", "builtin:smoothing")
    prior_icm = f.str_("prior.icm", "builtin:smoothing")
    for key, value in (("prior.vcm", prior_vcm), ("prior.icm", prior_icm)):
        if value and not _prior_binding_ok(value):
            f.errors.append(f"{key}: {value!r} is not builtin:gaussian|builtin:smoothing|"
                            f"builtin:identity|external:<command>")

    vxl = VisionXLConfig(
        rho_fraction=f.float_("vxl.rho_fraction", 0.3) or 0.3,
        cg_iters=f.int_("vxl.cg_iters", 5, minimum=1) or 5,
        sigma_max=f.float_("vxl.sigma_max", 2.0, minimum=0.0) or 0.0,
        sigma_n=sigma_n if sigma_n else 1e-3,
        seed=seed or 0,
    )
    if sampler == "vision-xl" and prior_vcm == "builtin:smoothing":
        f.errors.append("prior.vcm: vision-xl needs an eps-capable prior "
                        "(builtin:gaussian or external:<command>)")

    admm_rho = f.float_("admm.rho", 1.0, minimum=0.0)
    admm_iters = f.int_("admm.iters", 50, minimum=1)

    input_path = f.str_("paths.input", "")
    output_dir = f.str_("paths.output", "out")
    reference = f.str_("paths.reference", "")
    metrics_on = f.str_("metrics.enabled", "true", choices={"true", "false"}) == "true"

    if init == "file" and not init_file:
        f.errors.append("sampler.init_file: required when sampler.init = file")
    if check_paths:
        for key, p in (("paths.input", input_path), ("sampler.init_file", init_file),
                       ("paths.reference", reference)):
            if p and not Path(p).exists():
                f.errors.append(f"{key}: path does not exist: {p}")

    if f.errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(f.errors))

    try:
        sampler_cfg = SamplerConfig(
            vcm_timesteps=vcm_ts, icm_timesteps=icm_ts,
            step_vcm=step_vcm, step_icm=step_icm,
            tv_weights=TVWeights(lam_h, lam_v, lam_t),
            tv_solver=tv_solver, cg=cg, pdhg=pdhg, adam=adam,
            sigma_n=max(sigma_n, 1e-12), seed=seed, init="pseudo-inverse",
        )
    except ValueError as e:
        raise ConfigError(f"invalid config:\n  sampler: {e}") from e

    return ExperimentConfig(
        problem=problem, operator_spec=op_spec, sigma_n=sigma_n, noise_seed=noise_seed,
        sampler=sampler, sampler_cfg=sampler_cfg, vxl=vxl,
        admm_rho=admm_rho, admm_iters=admm_iters,
        prior_vcm=prior_vcm, prior_icm=prior_icm,
        input_path=input_path, output_dir=output_dir, init_file=init_file,
        reference_path=reference, metrics_enabled=metrics_on,
        raw_entries=dict(entries),
    )


def load_config_file(path, check_paths: bool = True) -> ExperimentConfig:
    return load_experiment_config(read_kv(path), check_paths=check_paths)
