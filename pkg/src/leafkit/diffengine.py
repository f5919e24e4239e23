"""Reverse-mode gradients through the frontend and backend.

The pipeline is fixed (Gabor conv -> |.|^2 -> Gaussian lowpass + stride ->
PCEN -> mean-pool -> dense head -> softmax cross-entropy), so the adjoint is
written out stage by stage rather than through a general-purpose tape.  The
PCEN smoother recurrence is differentiated exactly through all time steps.

Gradients are taken in the unconstrained coordinates the optimizer sees:
eta / sigma_bw / sigma_lp directly (clamped by projection, gradient zeroed
at an active bound), PCEN through its log/logit mappings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import (
    BackendModel,
    backend_backward,
    backend_forward,
    init_backend,
    softmax_cross_entropy,
)
from .errors import FormatError, NumericsError, SpecError
from .filterbank import SIGMA_MIN, GaborFilterbank, kernel_times, sigma_max
from .frontend import (
    FrontendParams,
    PcenParams,
    band_conv_plan,
    band_energies_array,
    lowpass_backward,
    lowpass_downsample_array,
    lowpass_kernels,
    pcen_forward_array,
)
from .utils import fmt_float

SIGMA_LP_MIN = 0.5

PARAM_GROUPS = (
    "eta", "sigma_bw", "sigma_lp",
    "pcen_alpha", "pcen_delta", "pcen_r", "pcen_s",
    "backend",
)


@dataclass(frozen=True)
class ModelSpec:
    """Static shapes and bounds shared by every ParamVector of one model."""

    n_filters: int
    kernel_width: int
    lp_width: int
    stride: int
    fs_hz: int
    n_hidden: int
    n_classes: int
    eps: float = 1e-6

    def layout(self):
        n, h, c = self.n_filters, self.n_hidden, self.n_classes
        sizes = [
            ("eta", n), ("sigma_bw", n), ("sigma_lp", n),
            ("pcen_alpha", n), ("pcen_delta", n), ("pcen_r", n), ("pcen_s", n),
            ("backend_w1", h * n), ("backend_b1", h),
            ("backend_w2", c * h), ("backend_b2", c),
        ]
        out, start = {}, 0
        for name, size in sizes:
            out[name] = slice(start, start + size)
            start += size
        return out, start

    @property
    def sigma_bw_max(self):
        return sigma_max(self.fs_hz, self.kernel_width)

    @property
    def sigma_lp_max(self):
        return (self.lp_width - 1) / 2.0


@dataclass
class ParamVector:
    """Flat, order-stable view over all trainable parameters."""

    values: np.ndarray
    mspec: ModelSpec

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        _, total = self.mspec.layout()
        if self.values.shape != (total,):
            raise SpecError(f"ParamVector length {self.values.shape} != layout {total}")

    def get(self, name: str) -> np.ndarray:
        slices, _ = self.mspec.layout()
        return self.values[slices[name]]

    @classmethod
    def from_parts(cls, fp: FrontendParams, backend: BackendModel, mspec: ModelSpec):
        vec = np.concatenate([
            fp.filterbank.eta, fp.filterbank.sigma_bw, fp.sigma_lp,
            fp.pcen.alpha_log, fp.pcen.delta_log, fp.pcen.r_logit, fp.pcen.s_logit,
            backend.w1.ravel(), backend.b1, backend.w2.ravel(), backend.b2,
        ])
        return cls(vec, mspec)

    def frontend_params(self) -> FrontendParams:
        m = self.mspec
        fb = GaborFilterbank(self.get("eta"), self.get("sigma_bw"), m.kernel_width)
        pcen = PcenParams(
            self.get("pcen_alpha"), self.get("pcen_delta"),
            self.get("pcen_r"), self.get("pcen_s"), m.eps,
        )
        return FrontendParams(fb, self.get("sigma_lp"), pcen, m.stride, m.lp_width)

    def backend_model(self) -> BackendModel:
        m = self.mspec
        return BackendModel(
            self.get("backend_w1").reshape(m.n_hidden, m.n_filters),
            self.get("backend_b1"),
            self.get("backend_w2").reshape(m.n_classes, m.n_hidden),
            self.get("backend_b2"),
        )

    def project(self) -> "ParamVector":
        """Clamp eta, sigma_bw and sigma_lp into their feasible intervals."""
        m = self.mspec
        slices, _ = m.layout()
        vec = self.values.copy()
        vec[slices["eta"]] = np.clip(vec[slices["eta"]], 0.0, 1.0)
        vec[slices["sigma_bw"]] = np.clip(vec[slices["sigma_bw"]], SIGMA_MIN, m.sigma_bw_max)
        vec[slices["sigma_lp"]] = np.clip(vec[slices["sigma_lp"]], SIGMA_LP_MIN, m.sigma_lp_max)
        return ParamVector(vec, m)

    def boundary_mask(self) -> np.ndarray:
        """True where a clamped coordinate sits exactly on its bound."""
        m = self.mspec
        slices, total = m.layout()
        mask = np.zeros(total, dtype=bool)
        eta = self.values[slices["eta"]]
        mask[slices["eta"]] = (eta <= 0.0) | (eta >= 1.0)
        sbw = self.values[slices["sigma_bw"]]
        mask[slices["sigma_bw"]] = (sbw <= SIGMA_MIN) | (sbw >= m.sigma_bw_max)
        slp = self.values[slices["sigma_lp"]]
        mask[slices["sigma_lp"]] = (slp <= SIGMA_LP_MIN) | (slp >= m.sigma_lp_max)
        return mask


def group_indices(mspec: ModelSpec, group: str) -> np.ndarray:
    """Flat indices belonging to a grad-check group."""
    slices, _ = mspec.layout()
    if group == "backend":
        parts = [slices[k] for k in ("backend_w1", "backend_b1", "backend_w2", "backend_b2")]
        return np.concatenate([np.arange(s.start, s.stop) for s in parts])
    if group not in slices:
        raise SpecError(f"unknown parameter group {group!r}")
    s = slices[group]
    return np.arange(s.start, s.stop)


def _as_batch(clips) -> np.ndarray:
    if isinstance(clips, np.ndarray):
        x = clips
    else:
        x = np.stack([np.asarray(getattr(c, "samples", c), dtype=np.float64) for c in clips])
    if x.ndim == 1:
        x = x[None, :]
    return np.asarray(x, dtype=np.float64)


@dataclass
class BackwardResult:
    loss: float
    grads: ParamVector
    logits: np.ndarray


def loss_only(clips, labels, pv: ParamVector, plan=None) -> float:
    """Forward pass to the scalar mean cross-entropy (used by grad_check)."""
    x = _as_batch(clips)
    labels = np.asarray(labels, dtype=int)
    fp = pv.frontend_params()
    plan = plan or band_conv_plan(x, fp.filterbank)
    _, _, energies = band_energies_array(x, fp.filterbank, plan)
    decimated = lowpass_downsample_array(energies, fp.sigma_lp, fp.stride, fp.lp_width)
    out, _ = pcen_forward_array(decimated, fp.pcen)
    features = out.mean(axis=2)
    logits, _ = backend_forward(pv.backend_model(), features)
    loss, _, _ = softmax_cross_entropy(logits, labels)
    return loss


def backward(clips, labels, pv: ParamVector, loss: str = "cross_entropy") -> BackwardResult:
    """Mean batch loss and its gradient w.r.t. every ParamVector entry."""
    if loss != "cross_entropy":
        raise SpecError(f"unsupported loss {loss!r}")
    x = _as_batch(clips)
    labels = np.asarray(labels, dtype=int)
    if x.shape[0] == 0:
        raise SpecError("batch must be nonempty")
    if labels.shape != (x.shape[0],):
        raise SpecError("labels must align with the clip batch")

    m = pv.mspec
    fp = pv.frontend_params()
    backend = pv.backend_model()
    eta, sigma_bw = fp.filterbank.eta, fp.filterbank.sigma_bw
    sigma_lp = fp.sigma_lp
    pcen = fp.pcen
    stride, W, P = m.stride, m.kernel_width, m.lp_width

    # ---- forward with cached intermediates
    plan = band_conv_plan(x, fp.filterbank)
    z_re, z_im, energies = band_energies_array(x, fp.filterbank, plan)
    if not np.all(np.isfinite(energies)):
        raise NumericsError("non-finite band energies", stage="band_energies")
    lp_k = lowpass_kernels(sigma_lp, P)
    frames = lowpass_downsample_array(energies, sigma_lp, stride, P)  # (B, N, T)

    out, M = pcen_forward_array(frames, pcen)
    if not np.all(np.isfinite(out)):
        raise NumericsError("non-finite PCEN output", stage="pcen")
    T = out.shape[2]
    features = out.mean(axis=2)

    logits, cache = backend_forward(backend, features)
    loss_val, dlogits, _ = softmax_cross_entropy(logits, labels)
    if not np.isfinite(loss_val):
        raise NumericsError("non-finite loss", stage="loss")

    # ---- backward
    dfeatures, dw1, db1, dw2, db2 = backend_backward(backend, cache, dlogits)
    d_out = np.broadcast_to(dfeatures[:, :, None] / T, out.shape).copy()

    # PCEN elementwise terms; channel params broadcast as (1, N, 1)
    alpha = pcen.alpha[None, :, None]
    delta = pcen.delta[None, :, None]
    r = pcen.r[None, :, None]
    s = pcen.s
    gain = (M + pcen.eps) ** alpha
    x_agc = frames / gain
    base = x_agc + delta
    pow_rm1 = base ** (r - 1.0)

    d_xagc = d_out * r * pow_rm1
    d_delta = (d_out * r * (pow_rm1 - delta ** (r - 1.0))).sum(axis=(0, 2))
    d_r = (d_out * (base**r * np.log(base) - delta**r * np.log(delta))).sum(axis=(0, 2))
    d_alpha = (d_xagc * (-x_agc) * np.log(M + pcen.eps)).sum(axis=(0, 2))

    d_frames = d_xagc / gain
    d_M = d_xagc * (-x_agc) * alpha / (M + pcen.eps)

    # smoother adjoint: M[t] = (1-s) M[t-1] + s E[t], M[0] = E[0]
    d_s = np.zeros(m.n_filters)
    s_col = s[None, :]
    for t in range(T - 1, 0, -1):
        g_t = d_M[..., t]
        d_s += (g_t * (frames[..., t] - M[..., t - 1])).sum(axis=0)
        d_frames[..., t] += s_col * g_t
        d_M[..., t - 1] += (1.0 - s_col) * g_t
    d_frames[..., 0] += d_M[..., 0]

    # chain the unconstrained PCEN mappings
    d_alpha_log = d_alpha * pcen.alpha
    d_delta_log = d_delta * pcen.delta
    d_r_logit = d_r * pcen.r * (1.0 - pcen.r)
    d_s_logit = d_s * pcen.s * (1.0 - pcen.s)

    # lowpass + decimation adjoint
    d_energies, d_lp_k = lowpass_backward(d_frames, energies, lp_k, stride, P)
    u = kernel_times(P)[None, :]
    lam = sigma_lp[:, None]
    d_sigma_lp = (d_lp_k * lp_k * (u**2 / lam**3 - 1.0 / lam)).sum(axis=1)

    # |z|^2 adjoint and band-conv kernel gradients
    d_zre = 2.0 * z_re * d_energies
    d_zim = 2.0 * z_im * d_energies
    d_kre = plan.kernel_grad(d_zre)
    d_kim = plan.kernel_grad(d_zim)

    t_w = kernel_times(W)[None, :]
    sig = sigma_bw[:, None]
    envelope = np.exp(-(t_w**2) / (2.0 * sig**2)) / (np.sqrt(2.0 * np.pi) * sig)
    carrier = np.pi * eta[:, None] * t_w
    cos_c, sin_c = np.cos(carrier), np.sin(carrier)
    d_eta = (np.pi * t_w * envelope * (d_kim * cos_c - d_kre * sin_c)).sum(axis=1)
    d_env = (d_kre * cos_c + d_kim * sin_c) * envelope * (t_w**2 / sig**3 - 1.0 / sig)
    d_sigma_bw = d_env.sum(axis=1)

    grads = np.concatenate([
        d_eta, d_sigma_bw, d_sigma_lp,
        d_alpha_log, d_delta_log, d_r_logit, d_s_logit,
        dw1.ravel(), db1, dw2.ravel(), db2,
    ])
    if not np.all(np.isfinite(grads)):
        raise NumericsError("non-finite gradient", stage="backward")

    # projected-gradient semantics: dead at an active clamp boundary
    grads[pv.boundary_mask()] = 0.0
    return BackwardResult(loss_val, ParamVector(grads, m), logits)


# ---------------------------------------------------------------------------
# finite-difference verification


@dataclass
class GroupCheck:
    group: str
    max_rel_err: float
    n_checked: int
    n_skipped: int
    worst_index: int = -1

    def passed(self, tolerance: float) -> bool:
        return self.n_checked == 0 or self.max_rel_err < tolerance


@dataclass
class GradCheckReport:
    groups: list
    tolerance: float
    h: float

    @property
    def passed(self) -> bool:
        return all(g.passed(self.tolerance) for g in self.groups)

    @property
    def max_rel_err(self) -> float:
        checked = [g.max_rel_err for g in self.groups if g.n_checked]
        return max(checked) if checked else 0.0


def grad_check(
    pv: ParamVector,
    clips,
    labels,
    h: float = 1e-4,
    coords_per_group: int = 8,
    tolerance: float = 1e-4,
    abs_floor: float = 1e-6,
    seed: int = 0,
) -> GradCheckReport:
    """Compare backward() against central finite differences per group.

    Coordinates sitting on a clamp boundary are skipped (the projection is
    nondifferentiable there) and counted in the report.  Failures are
    reported, never raised.
    """
    x = _as_batch(clips)
    labels = np.asarray(labels, dtype=int)
    analytic = backward(x, labels, pv).grads.values
    boundary = pv.boundary_mask()
    rng = np.random.Generator(np.random.PCG64(seed))

    groups = []
    for name in PARAM_GROUPS:
        idx = group_indices(pv.mspec, name)
        interior = idx[~boundary[idx]]
        skipped = len(idx) - len(interior)
        if len(interior) > coords_per_group:
            pick = np.sort(rng.choice(len(interior), size=coords_per_group, replace=False))
            interior = interior[pick]
        worst, worst_i = 0.0, -1
        for i in interior:
            probe = pv.values.copy()
            probe[i] += h
            loss_hi = loss_only(x, labels, ParamVector(probe, pv.mspec))
            probe[i] -= 2.0 * h
            loss_lo = loss_only(x, labels, ParamVector(probe, pv.mspec))
            fd = (loss_hi - loss_lo) / (2.0 * h)
            scale = max(abs(fd), abs(analytic[i]), abs_floor)
            rel = abs(fd - analytic[i]) / scale
            if rel > worst:
                worst, worst_i = rel, int(i)
        groups.append(GroupCheck(name, worst, len(interior), skipped, worst_i))
    return GradCheckReport(groups, tolerance, h)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int):
        return cls(np.zeros(n), np.zeros(n))


def adam_step(state: AdamState, pv: ParamVector, grads: ParamVector, lr: float):
    """One Adam update followed by feasibility projection; returns new pair."""
    g = grads.values
    if not np.all(np.isfinite(g)):
        raise NumericsError("non-finite gradient passed to adam_step", stage="adam")
    if g.shape != pv.values.shape:
        raise SpecError("gradient / parameter shape mismatch")
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)
    new_values = pv.values - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, step, state.beta1, state.beta2, state.eps)
    return new_state, ParamVector(new_values, pv.mspec).project()


def cosine_annealing_lr(step: int, period: int, lr_max: float, lr_min: float) -> float:
    """Cosine-annealed learning rate with warm restarts every `period` steps."""
    if period <= 0:
        raise SpecError("period must be positive")
    if step < 0:
        raise SpecError("step must be nonnegative")
    phase = (step % period) / period
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + np.cos(np.pi * phase))


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_MAGIC = "# leafkit-checkpoint v1"


def _join(values) -> str:
    return ",".join(fmt_float(v) for v in np.asarray(values, dtype=np.float64))


def save_checkpoint(path, pv: ParamVector, state: AdamState, extras: dict | None = None):
    """Versioned key = value text dump of parameters, moments and RNG state."""
    m = pv.mspec
    lines = [CHECKPOINT_MAGIC]
    for key in ("n_filters", "kernel_width", "lp_width", "stride", "fs_hz",
                "n_hidden", "n_classes"):
        lines.append(f"mspec.{key} = {getattr(m, key)}")
    lines.append(f"mspec.eps = {fmt_float(m.eps)}")
    lines.append(f"params = {_join(pv.values)}")
    lines.append(f"adam.m = {_join(state.m)}")
    lines.append(f"adam.v = {_join(state.v)}")
    lines.append(f"adam.step = {state.step}")
    for key, value in (extras or {}).items():
        lines.append(f"extra.{key} = {value}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (ParamVector, AdamState, extras)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a v1 leafkit checkpoint")
    kv = {}
    for ln in lines[1:]:
        if not ln.strip():
            continue
        key, _, value = ln.partition(" = ")
        kv[key.strip()] = value
    try:
        mspec = ModelSpec(
            n_filters=int(kv["mspec.n_filters"]),
            kernel_width=int(kv["mspec.kernel_width"]),
            lp_width=int(kv["mspec.lp_width"]),
            stride=int(kv["mspec.stride"]),
            fs_hz=int(kv["mspec.fs_hz"]),
            n_hidden=int(kv["mspec.n_hidden"]),
            n_classes=int(kv["mspec.n_classes"]),
            eps=float(kv["mspec.eps"]),
        )
        values = np.array([float(t) for t in kv["params"].split(",")])
        m_vec = np.array([float(t) for t in kv["adam.m"].split(",")])
        v_vec = np.array([float(t) for t in kv["adam.v"].split(",")])
        step = int(kv["adam.step"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint field: {exc}") from exc
    extras = {k[len("extra."):]: v for k, v in kv.items() if k.startswith("extra.")}
    return ParamVector(values, mspec), AdamState(m_vec, v_vec, step), extras


def init_param_vector(
    fb: GaborFilterbank,
    mspec: ModelSpec,
    sigma_lp_init: float = 80.0,
    pcen_init=(0.96, 2.0, 0.5, 0.04),
    backend_seed: int = 0,
) -> ParamVector:
    """Assemble the initial trainable state around a filterbank."""
    n = mspec.n_filters
    if fb.n_filters != n or fb.kernel_width != mspec.kernel_width:
        raise SpecError("filterbank does not match the model spec")
    alpha, delta, r, s = pcen_init
    fp = FrontendParams(
        fb,
        np.full(n, float(sigma_lp_init)),
        PcenParams.from_mapped(alpha, delta, r, s, n_channels=n, eps=mspec.eps),
        mspec.stride,
        mspec.lp_width,
    )
    backend = init_backend(n, mspec.n_hidden, mspec.n_classes, backend_seed)
    return ParamVector.from_parts(fp, backend, mspec).project()
