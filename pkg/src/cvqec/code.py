"""The five-channel error-correction pipeline.

Encode an input mode with four squeezed ancillas, inject a stochastic
displacement on one channel, decode with the inverse network, recognize the
error location from the homodyne syndrome pattern, and repair the output by
feedforward.  Both a symbolic route (exact quadrature forms) and a numeric
route (Gaussian moments and Monte-Carlo sampling) are provided; they agree in
the lossless case and the numeric route additionally models channel loss.

Detector/mode layout after decoding (positions 0..4): D1, D2, D3, output, D4.
In the standard configuration D1/D3/D4 read x and D2 reads p; running with
Fourier-rotated ancillas swaps every measurement basis, which localizes
displacements that live purely in p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from . import gaussian
from .errors import ErrorConfig, ErrorEvent, ErrorLaw, series_for_event
from .exact import (ExactScalar, LinearForm, ModeForm, QuadSymbol, SQRT2,
                    TAG_ANTISQUEEZED, TAG_SQUEEZED, form_covariance,
                    form_variance, mode_forms_apply_matrix, sqrt_of)
from .gaussian import (GaussianState, VACUUM_VAR, fidelity_from_moments, join)
from .gaussian import apply as apply_symplectic
from .network import encoder_matrix, inverse, lift_to_symplectic

INPUT_POS = 3
ANCILLA_ORIENTATIONS = ("amplitude", "phase", "amplitude", "amplitude")
OUT_POS = 3                               # decoded position of the output mode
DETECTORS = ("D1", "D2", "D3", "D4")
DETECTOR_POS = {"D1": 0, "D2": 1, "D3": 2, "D4": 4}
_STANDARD_BASIS = {"D1": "x", "D2": "p", "D3": "x", "D4": "x"}

MIN_SYNDROME_WINDOW = 30
FLUCTUATION_FACTOR = 3.0   # flag when excess variance exceeds 3x the baseline


def measured_quad(detector: str, fourier: bool) -> str:
    q = _STANDARD_BASIS[detector]
    if fourier:
        return "p" if q == "x" else "x"
    return q


class CorrectionUnavailable(RuntimeError):
    """No feedforward plan exists (ambiguous or unclassifiable syndrome)."""


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class CodeConfig:
    """Squeezing, input choice and optional channel loss for one code instance."""

    r: float | tuple[float, float, float, float] = 0.0
    input_kind: str = "vacuum"                 # "vacuum" | "squeezed"
    input_squeeze_db: float = 3.5
    input_antisqueeze_db: float = 8.9
    fourier_mode: bool = False
    channel_loss: float | tuple[float, ...] | None = None

    def __post_init__(self):
        if any(v < 0 for v in self.r_values):
            raise ValueError("squeezing parameter must be non-negative")
        if self.input_kind not in ("vacuum", "squeezed"):
            raise ValueError(f"unknown input kind {self.input_kind!r}")
        if any(not 0.0 <= eta <= 1.0 for eta in self.loss_values):
            raise ValueError("channel transmissivity must lie in [0, 1]")

    @property
    def r_values(self) -> tuple[float, float, float, float]:
        if isinstance(self.r, (tuple, list)):
            if len(self.r) != 4:
                raise ValueError("per-ancilla squeezing needs 4 values")
            return tuple(float(v) for v in self.r)
        return (float(self.r),) * 4

    @property
    def loss_values(self) -> tuple[float, float, float, float, float]:
        if self.channel_loss is None:
            return (1.0,) * 5
        if isinstance(self.channel_loss, (tuple, list)):
            if len(self.channel_loss) != 5:
                raise ValueError("per-channel loss needs 5 values")
            return tuple(float(v) for v in self.channel_loss)
        return (float(self.channel_loss),) * 5

    @property
    def has_loss(self) -> bool:
        return any(eta < 1.0 for eta in self.loss_values)

    def input_variances(self) -> tuple[float, float]:
        if self.input_kind == "vacuum":
            return (VACUUM_VAR, VACUUM_VAR)
        v_sq = VACUUM_VAR * 10.0 ** (-self.input_squeeze_db / 10.0)
        v_anti = VACUUM_VAR * 10.0 ** (self.input_antisqueeze_db / 10.0)
        return (v_anti, v_sq)   # phase-squeezed input: p is the quiet quadrature

    def input_state(self) -> GaussianState:
        v_x, v_p = self.input_variances()
        return GaussianState(1, np.zeros(2), np.diag([v_x, v_p]))


def coherent_ancilla_config(cfg: CodeConfig) -> CodeConfig:
    """The classical-limit twin of a configuration: unsqueezed ancillas."""
    return replace(cfg, r=0.0)


# --------------------------------------------------------------------------
# symbolic and numeric encoding


def source_mode_forms(cfg: CodeConfig) -> list[ModeForm]:
    """Quadrature forms of (a1, a2, a3, a_in, a4) before the network."""
    modes: list[ModeForm] = []
    anc = 0
    for pos in range(5):
        if pos == INPUT_POS:
            modes.append(ModeForm(LinearForm.of(QuadSymbol.input("x")),
                                  LinearForm.of(QuadSymbol.input("p"))))
            continue
        anc += 1
        if ANCILLA_ORIENTATIONS[anc - 1] == "amplitude":
            x_tag, p_tag = TAG_SQUEEZED, TAG_ANTISQUEEZED
        else:
            x_tag, p_tag = TAG_ANTISQUEEZED, TAG_SQUEEZED
        form = ModeForm(LinearForm.of(QuadSymbol.ancilla(anc, "x", x_tag)),
                        LinearForm.of(QuadSymbol.ancilla(anc, "p", p_tag)))
        if cfg.fourier_mode:
            form = form.fourier()
        modes.append(form)
    return modes


def error_mode_form(channel: int) -> ModeForm:
    return ModeForm(LinearForm.of(QuadSymbol.error(channel, "x")),
                    LinearForm.of(QuadSymbol.error(channel, "p")))


def _source_states(cfg: CodeConfig) -> GaussianState:
    states = []
    anc = 0
    for pos in range(5):
        if pos == INPUT_POS:
            states.append(cfg.input_state())
            continue
        anc += 1
        states.append(gaussian.squeezed_vacuum(cfg.r_values[anc - 1],
                                               ANCILLA_ORIENTATIONS[anc - 1]))
    return join(states)


def _fourier_flags(cfg: CodeConfig):
    if not cfg.fourier_mode:
        return None
    return [pos != INPUT_POS for pos in range(5)]


@dataclass(frozen=True)
class EncodedState:
    """The five channel modes, symbolically and numerically."""

    forms: tuple[ModeForm, ...]
    numeric: GaussianState
    cfg: CodeConfig
    events: tuple[ErrorEvent, ...] = ()


def encode(cfg: CodeConfig) -> EncodedState:
    """Runs the encoder on the input and ancilla modes."""
    u = encoder_matrix()
    forms = tuple(mode_forms_apply_matrix(source_mode_forms(cfg), u.rows))
    op = lift_to_symplectic(u, _fourier_flags(cfg))
    numeric = apply_symplectic(op, _source_states(cfg))
    return EncodedState(forms, numeric, cfg)


def inject_error(state: EncodedState, event: ErrorEvent) -> EncodedState:
    """Adds a displacement error to one channel (symbol + numeric mean shift)."""
    if not event.occurred:
        return replace(state, events=state.events + (event,))
    ch = event.channel
    forms = list(state.forms)
    forms[ch - 1] = forms[ch - 1] + error_mode_form(ch)
    mean = state.numeric.mean.copy()
    mean[2 * (ch - 1)] += event.dx
    mean[2 * (ch - 1) + 1] += event.dp
    numeric = GaussianState(5, mean, state.numeric.cov, validate=False)
    return EncodedState(tuple(forms), numeric, state.cfg,
                        state.events + (event,))


@dataclass(frozen=True)
class DecodedState:
    """Modes after the inverse network: (D1, D2, D3, output, D4)."""

    forms: tuple[ModeForm, ...]
    numeric: GaussianState
    cfg: CodeConfig
    events: tuple[ErrorEvent, ...] = ()

    @property
    def out_form(self) -> ModeForm:
        return self.forms[OUT_POS]

    def syndrome_forms(self) -> dict[str, ModeForm]:
        return {det: self.forms[DETECTOR_POS[det]] for det in DETECTORS}

    def readout_form(self, detector: str) -> LinearForm:
        """The quadrature form actually measured by one detector."""
        form = self.forms[DETECTOR_POS[detector]]
        return form.x if measured_quad(detector, self.cfg.fourier_mode) == "x" else form.p

    def readout_index(self, detector: str) -> int:
        quad = measured_quad(detector, self.cfg.fourier_mode)
        return 2 * DETECTOR_POS[detector] + (0 if quad == "x" else 1)


def decode(state: EncodedState) -> DecodedState:
    """Applies per-channel loss (numeric only) and the inverse network.

    The symbolic forms always describe the lossless algebra; channel loss is
    a numeric-route feature.
    """
    u = encoder_matrix()
    u_inv = inverse(u)
    forms = tuple(mode_forms_apply_matrix(state.forms, u_inv.rows))
    numeric = state.numeric
    for idx, eta in enumerate(state.cfg.loss_values):
        if eta < 1.0:
            numeric = gaussian.loss_channel(numeric, idx, eta)
    numeric = apply_symplectic(lift_to_symplectic(u_inv), numeric)
    return DecodedState(forms, numeric, state.cfg, state.events)


# --------------------------------------------------------------------------
# syndrome measurement and classification

IN_PHASE = "in-phase"
OUT_OF_PHASE = "out-of-phase"
NO_RELATION = "n/a"


@dataclass(frozen=True)
class SyndromeRecord:
    """Detector readouts (or their variances), fluctuation flags and phase relations."""

    mode: str                                  # "standard" | "fourier"
    variances: dict[str, float]
    baselines: dict[str, float]
    flags: dict[str, bool]
    relation_13: str
    relation_34: str
    window: int
    readouts: dict[str, np.ndarray] | None = None   # per-detector series
    out_series: np.ndarray | None = None            # (window, 2) output samples
    closed_form: bool = False


def _relation_from_sign(value: float) -> str:
    return IN_PHASE if value > 0 else OUT_OF_PHASE


def _error_coefficient(channel: int, position: int) -> float:
    """Float coefficient of the channel's error operator in a decoded position."""
    return float(encoder_matrix().entry(channel - 1, position))


def _decoded_noise_series(decoded: DecodedState, window: int,
                          rng: np.random.Generator,
                          channel_series) -> np.ndarray:
    """Samples (window, 10) decoded quadratures: quantum noise + error series."""
    noise = rng.multivariate_normal(np.zeros(10), decoded.numeric.cov, size=window)
    for channel, series in channel_series:
        scale = math.sqrt(decoded.cfg.loss_values[channel - 1])
        for pos in range(5):
            coeff = scale * _error_coefficient(channel, pos)
            if coeff:
                noise[:, 2 * pos] += coeff * series[:, 0]
                noise[:, 2 * pos + 1] += coeff * series[:, 1]
    return noise


def _record_from_noise(decoded: DecodedState, noise: np.ndarray,
                       window: int) -> SyndromeRecord:
    readouts, variances, baselines, flags = {}, {}, {}, {}
    for det in DETECTORS:
        idx = decoded.readout_index(det)
        readouts[det] = noise[:, idx]
        variances[det] = float(np.var(noise[:, idx], ddof=1))
        baselines[det] = float(decoded.numeric.cov[idx, idx])
        flags[det] = variances[det] > (1.0 + FLUCTUATION_FACTOR) * baselines[det]
    relation_13 = relation_34 = NO_RELATION
    if flags["D1"] and flags["D3"]:
        c = np.mean((readouts["D1"] - readouts["D1"].mean())
                    * (readouts["D3"] - readouts["D3"].mean()))
        relation_13 = _relation_from_sign(float(c))
    if flags["D3"] and flags["D4"]:
        c = np.mean((readouts["D3"] - readouts["D3"].mean())
                    * (readouts["D4"] - readouts["D4"].mean()))
        relation_34 = _relation_from_sign(float(c))
    return SyndromeRecord(
        mode="fourier" if decoded.cfg.fourier_mode else "standard",
        variances=variances, baselines=baselines, flags=flags,
        relation_13=relation_13, relation_34=relation_34, window=window,
        readouts=readouts, out_series=noise[:, 2 * OUT_POS:2 * OUT_POS + 2],
        closed_form=False)


def measure_syndrome(decoded: DecodedState, window: int,
                     rng: np.random.Generator) -> SyndromeRecord:
    """Simulates one syndrome window and flags detectors with excess variance.

    Every sample draws fresh quantum noise from the decoded covariance; an
    error event with a displacement law is re-drawn per sample, reproducing the
    quasi-random modulation that makes the error visible as fluctuation rather
    than as a DC offset.  An event without a law is held constant, so it shifts
    detector means but raises no fluctuation flag.
    """
    if window < MIN_SYNDROME_WINDOW:
        raise ValueError(f"syndrome window must be at least {MIN_SYNDROME_WINDOW}")
    channel_series = [(ev.channel, series_for_event(ev, window, rng))
                      for ev in decoded.events if ev.occurred]
    noise = _decoded_noise_series(decoded, window, rng, channel_series)
    return _record_from_noise(decoded, noise, window)


def syndrome_closed_form(decoded: DecodedState) -> SyndromeRecord:
    """Exact-coefficient syndrome record (no sampling, lossless algebra).

    A detector is flagged iff its measured quadrature carries a non-zero exact
    coefficient on an active error quadrature; phase relations come from the
    signs of the exact coefficients.
    """
    fourier = decoded.cfg.fourier_mode
    variances, baselines, flags = {}, {}, {}
    r = decoded.cfg.r_values
    input_var = decoded.cfg.input_variances()
    coeffs: dict[str, float] = {det: 0.0 for det in DETECTORS}
    for det in DETECTORS:
        form = decoded.readout_form(det)
        quad = measured_quad(det, fourier)
        base = form_variance(form.drop_errors(), r, input_var)
        excess = 0.0
        for event in decoded.events:
            if not event.occurred:
                continue
            law = event.law
            active = (law.active_quadratures() if law is not None
                      else tuple(q for q, v in zip("xp", (event.dx, event.dp)) if v))
            coeff = decoded.readout_form(det).coefficient(
                QuadSymbol.error(event.channel, quad))
            if quad in active and not coeff.is_zero():
                coeffs[det] = float(coeff)
                var = (law.quadrature_variances() if law is not None
                       else (event.dx ** 2, event.dp ** 2))
                excess += float(coeff) ** 2 * var[0 if quad == "x" else 1]
        baselines[det] = base
        variances[det] = base + excess
        flags[det] = excess > 0.0
    relation_13 = relation_34 = NO_RELATION
    if flags["D1"] and flags["D3"]:
        relation_13 = _relation_from_sign(coeffs["D1"] * coeffs["D3"])
    if flags["D3"] and flags["D4"]:
        relation_34 = _relation_from_sign(coeffs["D3"] * coeffs["D4"])
    return SyndromeRecord(
        mode="fourier" if fourier else "standard",
        variances=variances, baselines=baselines, flags=flags,
        relation_13=relation_13, relation_34=relation_34,
        window=0, closed_form=True)


NO_ERROR = "no-error"
CHANNEL = "channel"
AMBIGUOUS_P = "ambiguous-p"
UNCLASSIFIABLE = "unclassifiable"


@dataclass(frozen=True)
class ClassificationResult:
    kind: str
    channel: int | None = None

    def is_definite(self) -> bool:
        return self.kind in (NO_ERROR, CHANNEL)

    def __str__(self) -> str:
        return f"channel-{self.channel}" if self.kind == CHANNEL else self.kind


def classify(rec: SyndromeRecord) -> ClassificationResult:
    """Pattern-matches the fluctuation flags against the syndrome table."""
    f1, f2, f3, f4 = (rec.flags[d] for d in DETECTORS)
    if not (f1 or f2 or f3 or f4):
        return ClassificationResult(NO_ERROR)
    pattern = (f1, f3, f4)
    if pattern == (True, True, False):
        if rec.relation_13 == NO_RELATION:
            return ClassificationResult(UNCLASSIFIABLE)
        return ClassificationResult(CHANNEL, 1 if rec.relation_13 == IN_PHASE else 2)
    if pattern == (False, True, False):
        return ClassificationResult(CHANNEL, 3)
    if pattern == (False, True, True):
        if rec.relation_34 == NO_RELATION:
            return ClassificationResult(UNCLASSIFIABLE)
        return ClassificationResult(CHANNEL, 5 if rec.relation_34 == IN_PHASE else 4)
    if pattern == (False, False, False) and f2:
        return ClassificationResult(AMBIGUOUS_P)
    return ClassificationResult(UNCLASSIFIABLE)


# --------------------------------------------------------------------------
# feedforward plans

_G23 = sqrt_of(Fraction(2, 3))
_TWO_SQRT2 = ExactScalar(0, 2)

# (x feedforward, p feedforward) per channel; each entry is (detector, gain).
STANDARD_PLANS = {
    3: (("D3", _G23), ("D2", -SQRT2)),
    4: (("D4", _G23), ("D2", _TWO_SQRT2)),
    5: (("D4", -_G23), ("D2", _TWO_SQRT2)),
}
# With Fourier-rotated ancillas the roles of the two output quadratures swap:
# D2 (now reading x) repairs x and D3/D4 (now reading p) repair p.
FOURIER_PLANS = {
    3: (("D2", -SQRT2), ("D3", _G23)),
    4: (("D2", _TWO_SQRT2), ("D4", _G23)),
    5: (("D2", _TWO_SQRT2), ("D4", -_G23)),
}


@dataclass(frozen=True)
class CorrectionPlan:
    """Feedforward gains: readout * gain is added to the output quadrature."""

    x_ff: tuple[str, ExactScalar] | None = None
    p_ff: tuple[str, ExactScalar] | None = None
    fourier: bool = False

    def is_zero(self) -> bool:
        return self.x_ff is None and self.p_ff is None


ZERO_PLAN = CorrectionPlan()


def correction_plan(result: ClassificationResult, fourier: bool = False) -> CorrectionPlan:
    """Feedforward plan for a definite classification.

    Raises:
        CorrectionUnavailable: for ambiguous or unclassifiable results; the
            caller should rerun with rotated ancillas or give up.
    """
    if result.kind == NO_ERROR or (result.kind == CHANNEL and result.channel in (1, 2)):
        return replace(ZERO_PLAN, fourier=fourier)
    if result.kind == CHANNEL:
        x_ff, p_ff = (FOURIER_PLANS if fourier else STANDARD_PLANS)[result.channel]
        return CorrectionPlan(x_ff, p_ff, fourier)
    raise CorrectionUnavailable(f"no feedforward plan for {result}")


def derive_correction_plan(channel: int, fourier: bool = False) -> CorrectionPlan:
    """Derives the feedforward plan symbolically by requiring exact cancellation.

    For each output quadrature the candidate detectors are those whose measured
    quadrature carries the error; the one with the largest coupling is chosen
    (smallest gain, hence least added ancilla noise) and the gain solves
    out_coeff + gain * readout_coeff = 0 exactly.
    """
    if channel in (1, 2):
        return replace(ZERO_PLAN, fourier=fourier)
    cfg = CodeConfig(r=0.0, fourier_mode=fourier)
    decoded = decode(inject_error(encode(cfg), ErrorEvent(True, channel)))
    ffs = {}
    for quad in ("x", "p"):
        out_form = decoded.out_form.x if quad == "x" else decoded.out_form.p
        alpha = out_form.coefficient(QuadSymbol.error(channel, quad))
        best = None
        for det in DETECTORS:
            if measured_quad(det, fourier) != quad:
                continue
            beta = decoded.readout_form(det).coefficient(QuadSymbol.error(channel, quad))
            if beta.is_zero():
                continue
            if best is None or abs(float(beta)) > abs(float(best[1])):
                best = (det, beta)
        if best is None:
            raise CorrectionUnavailable(
                f"no detector sees the channel-{channel} error in {quad}")
        det, beta = best
        ffs[quad] = (det, -(alpha / beta))
    return CorrectionPlan(ffs["x"], ffs["p"], fourier)


# --------------------------------------------------------------------------
# applying the correction


@dataclass(frozen=True)
class CorrectedOutput:
    """The repaired output mode: exact form, Gaussian moments, optional samples."""

    form: ModeForm
    state: GaussianState
    series: np.ndarray | None = None

    def empirical_moments(self) -> tuple[np.ndarray, np.ndarray]:
        if self.series is None:
            raise ValueError("no sample series attached")
        mean = self.series.mean(axis=0)
        cov = np.cov(self.series.T, ddof=1)
        return mean, cov


def _plan_rows(decoded: DecodedState, plan: CorrectionPlan) -> np.ndarray:
    """2x10 linear map from decoded quadratures to the corrected output."""
    rows = np.zeros((2, 10))
    rows[0, 2 * OUT_POS] = 1.0
    rows[1, 2 * OUT_POS + 1] = 1.0
    for row, ff in ((0, plan.x_ff), (1, plan.p_ff)):
        if ff is None:
            continue
        det, gain = ff
        rows[row, decoded.readout_index(det)] += float(gain)
    return rows


def apply_correction(decoded: DecodedState, plan: CorrectionPlan,
                     rec: SyndromeRecord | None = None) -> CorrectedOutput:
    """Adds the gained readouts to the output mode.

    Returns the corrected output in all live representations: the exact
    quadrature forms (error symbols cancel for a correct plan), the Gaussian
    moments, and, when a sampled syndrome record is supplied, the corrected
    sample series.
    """
    x_form, p_form = decoded.out_form.x, decoded.out_form.p
    if plan.x_ff is not None:
        det, gain = plan.x_ff
        x_form = x_form + decoded.readout_form(det).scaled(gain)
    if plan.p_ff is not None:
        det, gain = plan.p_ff
        p_form = p_form + decoded.readout_form(det).scaled(gain)
    rows = _plan_rows(decoded, plan)
    mean = rows @ decoded.numeric.mean
    cov = rows @ decoded.numeric.cov @ rows.T
    state = GaussianState(1, mean, cov, validate=False)
    series = None
    if rec is not None and rec.readouts is not None:
        series = rec.out_series.copy()
        for col, ff in ((0, plan.x_ff), (1, plan.p_ff)):
            if ff is not None:
                det, gain = ff
                series[:, col] += float(gain) * rec.readouts[det]
    return CorrectedOutput(ModeForm(x_form, p_form), state, series)


# --------------------------------------------------------------------------
# closed-form pipeline moments (no sampling)


class PipelineMaps:
    """Precomputed linear maps of one encode/loss/decode pass.

    Decoded quadratures q_dec = A_src q_src + A_err e + A_vac v, where q_src
    are the independent source quadratures, e the per-channel displacement and
    v the loss vacua.
    """

    def __init__(self, cfg: CodeConfig, fourier: bool):
        self.cfg = cfg
        self.fourier = fourier
        u = encoder_matrix()
        flags = [pos != INPUT_POS for pos in range(5)] if fourier else None
        s_enc = lift_to_symplectic(u, flags).S
        s_dec = lift_to_symplectic(inverse(u)).S
        eta = np.repeat(np.sqrt(cfg.loss_values), 2)
        self.A_src = s_dec @ (eta[:, None] * s_enc)
        self.A_err = s_dec * eta[None, :]
        self.A_vac = s_dec * np.sqrt(1.0 - eta ** 2)[None, :]
        sigma = np.empty(10)
        v_x, v_p = cfg.input_variances()
        anc = 0
        for pos in range(5):
            if pos == INPUT_POS:
                sigma[2 * pos], sigma[2 * pos + 1] = math.sqrt(v_x), math.sqrt(v_p)
                continue
            r_m = cfg.r_values[anc]
            quiet = VACUUM_VAR * math.exp(-2.0 * r_m)
            loud = VACUUM_VAR * math.exp(2.0 * r_m)
            if ANCILLA_ORIENTATIONS[anc] == "amplitude":
                sigma[2 * pos], sigma[2 * pos + 1] = math.sqrt(quiet), math.sqrt(loud)
            else:
                sigma[2 * pos], sigma[2 * pos + 1] = math.sqrt(loud), math.sqrt(quiet)
            anc += 1
        self.sigma_src = sigma
        self.has_loss = cfg.has_loss

    def decoded_cov(self) -> np.ndarray:
        cov = (self.A_src * self.sigma_src ** 2) @ self.A_src.T
        if self.has_loss:
            cov = cov + VACUUM_VAR * self.A_vac @ self.A_vac.T
        return cov

    def readout_index(self, detector: str) -> int:
        quad = measured_quad(detector, self.fourier)
        return 2 * DETECTOR_POS[detector] + (0 if quad == "x" else 1)

    def detector_rows(self) -> list[int]:
        return [self.readout_index(det) for det in DETECTORS]

    def output_rows(self) -> list[int]:
        return [2 * OUT_POS, 2 * OUT_POS + 1]

    def plan_matrix(self, plan: CorrectionPlan) -> np.ndarray:
        rows = np.zeros((2, 10))
        rows[0, 2 * OUT_POS] = 1.0
        rows[1, 2 * OUT_POS + 1] = 1.0
        for row, ff in ((0, plan.x_ff), (1, plan.p_ff)):
            if ff is not None:
                det, gain = ff
                rows[row, self.readout_index(det)] += float(gain)
        return rows


@dataclass(frozen=True)
class OutputStats:
    """Closed-form output moments and the resulting fidelity."""

    mean: np.ndarray
    cov: np.ndarray
    fidelity: float

    @property
    def V_x(self) -> float:
        return float(self.cov[0, 0])

    @property
    def V_p(self) -> float:
        return float(self.cov[1, 1])

    def noise_db(self, quad: str) -> float:
        return gaussian.variance_to_db(self.V_x if quad == "x" else self.V_p)


def closed_form_output(cfg: CodeConfig, channel: int | None, corrected: bool = True,
                       displacement: tuple[float, float] = (0.0, 0.0),
                       extra_error_var: tuple[float, float] = (0.0, 0.0),
                       fourier: bool | None = None) -> OutputStats:
    """Output moments of one branch of the round, computed without sampling.

    Args:
        cfg: code configuration.
        channel: hit channel, or None for the error-free branch.
        corrected: apply the channel's feedforward plan (channels 3..5).
        displacement: the branch's fixed displacement (dx, dp).
        extra_error_var: additional displacement variance per quadrature
            (Gaussian-shaped laws).
        fourier: override the measurement configuration (defaults to the
            config's mode).
    """
    fourier = cfg.fourier_mode if fourier is None else fourier
    maps = PipelineMaps(cfg, fourier)
    if channel in (None, 1, 2) or not corrected:
        plan = CorrectionPlan(fourier=fourier)
    else:
        plan = correction_plan(ClassificationResult(CHANNEL, channel), fourier)
    rows = maps.plan_matrix(plan)
    cov = rows @ maps.decoded_cov() @ rows.T
    mean = np.zeros(2)
    if channel is not None:
        cols = (2 * (channel - 1), 2 * (channel - 1) + 1)
        err_rows = rows @ maps.A_err[:, cols]        # (2, 2)
        mean = err_rows @ np.asarray(displacement, dtype=float)
        cov = cov + err_rows @ np.diag(extra_error_var) @ err_rows.T
    inp = cfg.input_state()
    fid = fidelity_from_moments(inp.mean, inp.cov, mean, cov)
    return OutputStats(mean=mean, cov=cov, fidelity=fid)


# --------------------------------------------------------------------------
# full correction rounds

_CODE_NO_ERROR = 0
_CODE_AMBIGUOUS = 6
_CODE_UNCLASSIFIABLE = 7

_CODE_TO_RESULT = {
    _CODE_NO_ERROR: ClassificationResult(NO_ERROR),
    _CODE_AMBIGUOUS: ClassificationResult(AMBIGUOUS_P),
    _CODE_UNCLASSIFIABLE: ClassificationResult(UNCLASSIFIABLE),
    **{k: ClassificationResult(CHANNEL, k) for k in range(1, 6)},
}


def _result_to_code(result: ClassificationResult) -> int:
    if result.kind == CHANNEL:
        return result.channel
    return {NO_ERROR: _CODE_NO_ERROR, AMBIGUOUS_P: _CODE_AMBIGUOUS,
            UNCLASSIFIABLE: _CODE_UNCLASSIFIABLE}[result.kind]


@dataclass(frozen=True)
class RoundReport:
    """Everything observed in one correction round."""

    injected_channel: int | None
    injected_dx: float
    injected_dp: float
    first_classification: ClassificationResult
    final_classification: ClassificationResult
    fourier_used: bool
    matched: bool
    corrected_mean: tuple[float, float]
    corrected_var: tuple[float, float]
    corrected_cov_xp: float
    fidelity_mc: float
    fidelity_theory: float
    flags: dict[str, bool]
    relations: tuple[str, str]
    traces: dict[str, np.ndarray] | None = None

    def write_traces_csv(self, path) -> None:
        """Dumps the stored readout series as CSV (sample index, one detector
        per column, then the corrected output quadratures)."""
        import csv

        if self.traces is None:
            raise ValueError("this report was produced without traces")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample"] + list(DETECTORS)
                            + ["corrected_x", "corrected_p"])
            corrected = self.traces["corrected"]
            for t in range(corrected.shape[0]):
                writer.writerow([t] + [repr(float(self.traces[d][t]))
                                       for d in DETECTORS]
                                + [repr(float(corrected[t, 0])),
                                   repr(float(corrected[t, 1]))])

    def to_dict(self) -> dict:
        return {
            "injected_channel": self.injected_channel,
            "injected_dx": self.injected_dx,
            "injected_dp": self.injected_dp,
            "first_classification": str(self.first_classification),
            "final_classification": str(self.final_classification),
            "fourier_used": self.fourier_used,
            "matched": self.matched,
            "corrected_mean": list(self.corrected_mean),
            "corrected_var": list(self.corrected_var),
            "corrected_cov_xp": self.corrected_cov_xp,
            "fidelity_mc": self.fidelity_mc,
            "fidelity_theory": self.fidelity_theory,
            "flags": dict(self.flags),
            "relations": list(self.relations),
        }


def _theory_stats(cfg: CodeConfig, code: int, fourier: bool, channel: int,
                  law: ErrorLaw, cache: dict) -> OutputStats:
    key = (code, fourier, channel)
    if key not in cache:
        if code in (1, 2, 3, 4, 5):
            cache[key] = closed_form_output(cfg, code, corrected=True, fourier=fourier)
        elif code == _CODE_NO_ERROR:
            cache[key] = closed_form_output(cfg, None, fourier=fourier)
        else:
            extra = law.quadrature_variances() if channel else (0.0, 0.0)
            cache[key] = closed_form_output(cfg, channel or None, corrected=False,
                                            extra_error_var=extra, fourier=fourier)
    return cache[key]


def run_round(cfg: CodeConfig, error_cfg: ErrorConfig, rng: np.random.Generator,
              window: int = 512) -> RoundReport:
    """One full correction round through the composed pipeline operations.

    Encode, sample and inject the error, decode, measure the syndrome window,
    classify, and repair the output.  When the first pass is ambiguous (a
    pure-p displacement), the round is repeated once with rotated ancillas and
    swapped measurement bases; a second ambiguity is unclassifiable.
    """
    from .errors import sample_error

    event = sample_error(error_cfg, rng)
    decoded = decode(inject_error(encode(cfg), event))
    rec = measure_syndrome(decoded, window, rng)
    first = classify(rec)
    final, fourier_used = first, False
    used_decoded, used_rec = decoded, rec
    if first.kind == AMBIGUOUS_P:
        fourier_used = True
        alt_cfg = replace(cfg, fourier_mode=not cfg.fourier_mode)
        alt_decoded = decode(inject_error(encode(alt_cfg), event))
        alt_rec = measure_syndrome(alt_decoded, window, rng)
        second = classify(alt_rec)
        final = (second if second.kind != AMBIGUOUS_P
                 else ClassificationResult(UNCLASSIFIABLE))
        if second.is_definite():
            used_decoded, used_rec = alt_decoded, alt_rec
    mode_fourier = used_decoded.cfg.fourier_mode
    try:
        plan = correction_plan(final, mode_fourier)
    except CorrectionUnavailable:
        plan = CorrectionPlan(fourier=mode_fourier)
    out = apply_correction(used_decoded, plan, used_rec)
    emp_mean, emp_cov = out.empirical_moments()
    inp = cfg.input_state()
    fid_mc = fidelity_from_moments(inp.mean, inp.cov, emp_mean, emp_cov)
    theory = _theory_stats(cfg, _result_to_code(final), mode_fourier,
                           event.channel if event.occurred else 0,
                           error_cfg.law, {})
    matched = (final.kind == CHANNEL and final.channel == event.channel
               if event.occurred else final.kind == NO_ERROR)
    traces = dict(rec.readouts)
    traces["corrected"] = out.series
    return RoundReport(
        injected_channel=event.channel if event.occurred else None,
        injected_dx=event.dx, injected_dp=event.dp,
        first_classification=first, final_classification=final,
        fourier_used=fourier_used, matched=matched,
        corrected_mean=tuple(emp_mean), corrected_var=(emp_cov[0, 0], emp_cov[1, 1]),
        corrected_cov_xp=float(emp_cov[0, 1]),
        fidelity_mc=fid_mc, fidelity_theory=theory.fidelity,
        flags=dict(rec.flags), relations=(rec.relation_13, rec.relation_34),
        traces=traces)


class _PassData:
    """Readout series of one batched pass, rows ordered (D1..D4, out_x, out_p)."""

    __slots__ = ("series", "variances", "flags", "cc13", "cc34", "baselines")

    def __init__(self, series, baselines):
        self.series = series
        self.baselines = baselines
        self.variances = series.var(axis=1, ddof=1)
        self.flags = self.variances[:, :4] > (1.0 + FLUCTUATION_FACTOR) * baselines[:4]
        centered = series - series.mean(axis=1, keepdims=True)
        self.cc13 = (centered[:, :, 0] * centered[:, :, 2]).mean(axis=1)
        self.cc34 = (centered[:, :, 2] * centered[:, :, 3]).mean(axis=1)


def _simulate_pass(maps: PipelineMaps, channels: np.ndarray, occurred: np.ndarray,
                   law: ErrorLaw, window: int, rng: np.random.Generator) -> _PassData:
    rows = maps.detector_rows() + maps.output_rows()
    mix = (maps.A_src * maps.sigma_src)[rows]
    n = len(channels)
    series = rng.standard_normal((n, window, 10)) @ mix.T
    baselines = (mix ** 2).sum(axis=1)
    if maps.has_loss:
        vac = maps.A_vac[rows] * math.sqrt(VACUUM_VAR)
        series += rng.standard_normal((n, window, 10)) @ vac.T
        baselines = baselines + (vac ** 2).sum(axis=1)
    idx = np.flatnonzero(occurred)
    if len(idx):
        draws = law.draw(rng, len(idx) * window).reshape(len(idx), window, 2)
        err_rows = maps.A_err[rows]
        coeff_x = err_rows[:, 2 * (channels[idx] - 1)].T
        coeff_p = err_rows[:, 2 * (channels[idx] - 1) + 1].T
        series[idx] += (draws[:, :, :1] * coeff_x[:, None, :]
                        + draws[:, :, 1:] * coeff_p[:, None, :])
    return _PassData(series, baselines)


def _classify_codes(p: _PassData) -> np.ndarray:
    f1, f2, f3, f4 = (p.flags[:, k] for k in range(4))
    codes = np.full(len(f1), _CODE_UNCLASSIFIABLE, dtype=np.int8)
    codes[~(f1 | f2 | f3 | f4)] = _CODE_NO_ERROR
    m = f1 & f3 & ~f4
    codes[m & (p.cc13 > 0)] = 1
    codes[m & (p.cc13 <= 0)] = 2
    codes[~f1 & f3 & ~f4] = 3
    m = ~f1 & f3 & f4
    codes[m & (p.cc34 > 0)] = 5
    codes[m & (p.cc34 <= 0)] = 4
    codes[~f1 & ~f3 & ~f4 & f2] = _CODE_AMBIGUOUS
    return codes


def summarize_reports(cfg: CodeConfig, reports: list["RoundReport"],
                      window: int) -> "RoundsSummary":
    """Aggregates per-round reports; pooled moments are reconstructed exactly
    from each round's sufficient statistics, so chunked runs merge losslessly."""
    sums: dict[str, list] = {}
    counts: dict[str, int] = {}
    for rep in reports:
        key = str(rep.final_classification)
        counts[key] = counts.get(key, 0) + 1
        acc = sums.setdefault(key, [0, np.zeros(2), np.zeros(2), 0.0])
        mean = np.asarray(rep.corrected_mean)
        var = np.asarray(rep.corrected_var)
        acc[0] += window
        acc[1] += window * mean
        acc[2] += (window - 1) * var + window * mean ** 2
        acc[3] += (window - 1) * rep.corrected_cov_xp + window * mean[0] * mean[1]
    inp = cfg.input_state()
    pooled_moments = {}
    pooled_fidelity = {}
    for key, (n, s1, s2, sxy) in sums.items():
        mean = s1 / n
        var = (s2 - n * mean ** 2) / (n - 1)
        cxy = (sxy - n * mean[0] * mean[1]) / (n - 1)
        cov = np.array([[var[0], cxy], [cxy, var[1]]])
        pooled_moments[key] = (mean, cov)
        pooled_fidelity[key] = fidelity_from_moments(inp.mean, inp.cov, mean, cov)
    return RoundsSummary(
        n_rounds=len(reports), window=window, counts=counts,
        occurrence_fraction=float(np.mean([r.injected_channel is not None
                                           for r in reports])),
        accuracy=float(np.mean([r.matched for r in reports])),
        fourier_rate=float(np.mean([r.fourier_used for r in reports])),
        pooled_moments=pooled_moments, pooled_fidelity=pooled_fidelity)


@dataclass
class RoundsSummary:
    """Aggregate results of a batch of rounds."""

    n_rounds: int
    window: int
    counts: dict[str, int]
    occurrence_fraction: float
    accuracy: float
    fourier_rate: float
    pooled_moments: dict[str, tuple[np.ndarray, np.ndarray]]
    pooled_fidelity: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "n_rounds": self.n_rounds,
            "window": self.window,
            "counts": dict(self.counts),
            "occurrence_fraction": self.occurrence_fraction,
            "accuracy": self.accuracy,
            "fourier_rate": self.fourier_rate,
            "pooled_fidelity": dict(self.pooled_fidelity),
        }


@dataclass
class RoundsOutcome:
    reports: list[RoundReport]
    summary: RoundsSummary


def run_rounds(cfg: CodeConfig, error_cfg: ErrorConfig, rng: np.random.Generator,
               n_rounds: int, window: int = 512,
               store_traces: bool = False) -> RoundsOutcome:
    """Batched correction rounds (vectorized twin of run_round).

    All rounds draw from one generator in a fixed order, so a fixed seed gives
    identical results regardless of how the caller consumes the reports.
    """
    if window < MIN_SYNDROME_WINDOW:
        raise ValueError(f"syndrome window must be at least {MIN_SYNDROME_WINDOW}")
    law = error_cfg.law
    occurred = rng.random(n_rounds) < error_cfg.gamma
    if error_cfg.channel == "uniform":
        channels = rng.integers(1, 6, n_rounds)
    else:
        channels = np.full(n_rounds, int(error_cfg.channel))
    channels = np.where(occurred, channels, 0)
    rep = np.zeros((n_rounds, 2))
    if occurred.any():
        rep[occurred] = law.draw(rng, int(occurred.sum()))

    maps1 = PipelineMaps(cfg, cfg.fourier_mode)
    maps2 = PipelineMaps(cfg, not cfg.fourier_mode)
    pass1 = _simulate_pass(maps1, channels, occurred, law, window, rng)
    codes1 = _classify_codes(pass1)
    final = codes1.copy()
    rerun_idx = np.flatnonzero(codes1 == _CODE_AMBIGUOUS)
    pass2 = None
    sub_pos = {}
    if len(rerun_idx):
        pass2 = _simulate_pass(maps2, channels[rerun_idx], occurred[rerun_idx],
                               law, window, rng)
        codes2 = _classify_codes(pass2)
        codes2[codes2 == _CODE_AMBIGUOUS] = _CODE_UNCLASSIFIABLE
        final[rerun_idx] = codes2
        sub_pos = {int(r): k for k, r in enumerate(rerun_idx)}

    inp = cfg.input_state()
    theory_cache: dict = {}
    reports: list[RoundReport] = []
    plan_cols = {}

    def _plan_columns(code: int, fourier: bool):
        key = (code, fourier)
        if key not in plan_cols:
            if code in (3, 4, 5):
                x_ff, p_ff = (FOURIER_PLANS if fourier else STANDARD_PLANS)[code]
                plan_cols[key] = ((DETECTORS.index(x_ff[0]), float(x_ff[1])),
                                  (DETECTORS.index(p_ff[0]), float(p_ff[1])))
            else:
                plan_cols[key] = (None, None)
        return plan_cols[key]

    for i in range(n_rounds):
        code = int(final[i])
        used_fourier = maps2.fourier if i in sub_pos else maps1.fourier
        if i in sub_pos and final[i] in (1, 2, 3, 4, 5, _CODE_NO_ERROR):
            src = pass2.series[sub_pos[i]]
        elif i in sub_pos:
            src = pass1.series[i]      # unresolved rerun: report the first pass
            used_fourier = maps1.fourier
        else:
            src = pass1.series[i]
        corrected = src[:, 4:6].copy()
        x_col, p_col = _plan_columns(code, used_fourier)
        if x_col is not None:
            corrected[:, 0] += x_col[1] * src[:, x_col[0]]
            corrected[:, 1] += p_col[1] * src[:, p_col[0]]
        mean = corrected.mean(axis=0)
        var = corrected.var(axis=0, ddof=1)
        cxy = float(np.cov(corrected.T, ddof=1)[0, 1])
        cov = np.array([[var[0], cxy], [cxy, var[1]]])
        fid_mc = fidelity_from_moments(inp.mean, inp.cov, mean, cov)
        theory = _theory_stats(cfg, code, used_fourier, int(channels[i]),
                               law, theory_cache)
        result = _CODE_TO_RESULT[code]
        matched = (result.kind == CHANNEL and result.channel == channels[i]
                   if occurred[i] else result.kind == NO_ERROR)
        first_res = _CODE_TO_RESULT[int(codes1[i])]
        traces = None
        if store_traces:
            traces = {det: pass1.series[i, :, k] for k, det in enumerate(DETECTORS)}
            traces["corrected"] = corrected
        reports.append(RoundReport(
            injected_channel=int(channels[i]) if occurred[i] else None,
            injected_dx=float(rep[i, 0]), injected_dp=float(rep[i, 1]),
            first_classification=first_res, final_classification=result,
            fourier_used=bool(codes1[i] == _CODE_AMBIGUOUS), matched=bool(matched),
            corrected_mean=tuple(mean), corrected_var=(float(var[0]), float(var[1])),
            corrected_cov_xp=cxy,
            fidelity_mc=fid_mc, fidelity_theory=theory.fidelity,
            flags={det: bool(pass1.flags[i, k]) for k, det in enumerate(DETECTORS)},
            relations=(_relation_from_sign(pass1.cc13[i]) if pass1.flags[i, 0] and pass1.flags[i, 2] else NO_RELATION,
                       _relation_from_sign(pass1.cc34[i]) if pass1.flags[i, 2] and pass1.flags[i, 3] else NO_RELATION),
            traces=traces))

    return RoundsOutcome(reports, summarize_reports(cfg, reports, window))


def syndrome_trace(cfg: CodeConfig, channel: int | None, window: int,
                   rng: np.random.Generator, magnitude: float,
                   cycles: float = 3.0) -> tuple[dict[str, np.ndarray], ClassificationResult]:
    """One oscilloscope-style trace with a slowly swept error phase.

    Returns the per-detector readout series (plus the uncorrected output
    quadratures) and the classification of the trace.
    """
    if window < MIN_SYNDROME_WINDOW:
        raise ValueError(f"syndrome window must be at least {MIN_SYNDROME_WINDOW}")
    decoded = decode(encode(cfg))
    channel_series = []
    if channel is not None and magnitude > 0:
        phase = (2.0 * math.pi * cycles * np.arange(window) / window
                 + rng.uniform(0.0, 2.0 * math.pi))
        sweep = np.column_stack([magnitude * np.cos(phase),
                                 magnitude * np.sin(phase)])
        channel_series.append((channel, sweep))
    noise = _decoded_noise_series(decoded, window, rng, channel_series)
    rec = _record_from_noise(decoded, noise, window)
    traces = {det: rec.readouts[det] for det in DETECTORS}
    traces["out_x"] = noise[:, 2 * OUT_POS]
    traces["out_p"] = noise[:, 2 * OUT_POS + 1]
    return traces, classify(rec)
