"""Inseparability witness of the encoded five-mode state.

Four combinations of correlation variances, each the sum of an x-type and a
p-type term with tunable gains g1..g6, certify cluster-type entanglement when
they drop below the separable bound.  Variances are evaluated on the exact
encoded quadrature forms with a vacuum input; the bound normalization is
pinned so that unsqueezed ancillas with optimal gains sit exactly on the
boundary (value 1) and any non-zero squeezing falls below it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .code import CodeConfig, encode
from .exact import LinearForm, symbol_variance

SEPARABLE_BOUND = 1.0

# Each term: (quadrature, fixed parts as (weight, channel), gain slot 0..5 or
# None, gained part as (weight sign, channel)).  Channels are 1-based.
_TERMS = {
    1: (("x", ((1, 1), (1, 2)), None, None),
        ("p", ((1, 2), (-1, 1)), 2, (-1, 3))),          # g3
    2: (("p", ((1, 2), (-1, 3)), 0, (-1, 1)),           # g1
        ("x", ((1, 3), (1, 2)), 3, (1, 4))),            # g4
    3: (("x", ((1, 3), (1, 4)), 1, (1, 2)),             # g2
        ("p", ((1, 4), (-1, 3)), 4, (-1, 5))),          # g5
    4: (("p", ((1, 4), (-1, 5)), 5, (-1, 3)),           # g6
        ("x", ((1, 4), (1, 5)), None, None)),
}

_DEGENERATE_VAR = 1e-30


def _check_vacuum_input(cfg: CodeConfig) -> None:
    if cfg.input_kind != "vacuum":
        raise ValueError("the witness is defined for a vacuum input state")


def _quad_form(forms, channel: int, quad: str) -> LinearForm:
    mode = forms[channel - 1]
    return mode.x if quad == "x" else mode.p


def _accumulate(pairs) -> dict:
    coeffs: dict = {}
    for weight, form in pairs:
        for sym, coeff in form.terms.items():
            coeffs[sym] = coeffs.get(sym, 0.0) + weight * float(coeff)
    return coeffs


def _variance_of(coeffs: dict, r, input_var) -> float:
    return sum(c * c * symbol_variance(sym, r, input_var)
               for sym, c in coeffs.items())


def _covariance_of(ca: dict, cb: dict, r, input_var) -> float:
    return sum(c * cb[sym] * symbol_variance(sym, r, input_var)
               for sym, c in ca.items() if sym in cb)


def _term_pairs(forms, term, gains):
    quad, fixed, slot, gained = term
    pairs = [(float(w), _quad_form(forms, ch, quad)) for w, ch in fixed]
    if slot is not None:
        sign, ch = gained
        pairs.append((sign * float(gains[slot]), _quad_form(forms, ch, quad)))
    return pairs


def combination_value(idx: int, gains, cfg: CodeConfig) -> float:
    """Left-hand side of one witness inequality (separable bound is 1)."""
    if idx not in _TERMS:
        raise ValueError("combination index must be 1..4")
    _check_vacuum_input(cfg)
    forms = encode(cfg).forms
    r = cfg.r_values
    input_var = cfg.input_variances()
    total = 0.0
    for term in _TERMS[idx]:
        coeffs = _accumulate(_term_pairs(forms, term, gains))
        total += _variance_of(coeffs, r, input_var)
    return total


@dataclass(frozen=True)
class WitnessResult:
    """The four combination values with the gains that minimize them."""

    values: tuple[float, float, float, float]
    gains: tuple[float, float, float, float, float, float]
    satisfied: tuple[bool, bool, bool, bool]
    degenerate_gains: tuple[int, ...] = ()

    def all_satisfied(self) -> bool:
        return all(self.satisfied)

    def to_dict(self) -> dict:
        return {
            "values": list(self.values),
            "gains": list(self.gains),
            "satisfied": list(self.satisfied),
            "bound": SEPARABLE_BOUND,
            "degenerate_gains": list(self.degenerate_gains),
        }


def optimize_gains(cfg: CodeConfig) -> tuple[tuple[float, ...], tuple[int, ...]]:
    """Closed-form minimizing gains g1..g6.

    Each gained term is Var(base + s*g*m), a parabola in g with vertex
    g* = -s Cov(base, m) / Var(m).  Returns the gains and the slots (if any)
    that were degenerate and pinned to zero.
    """
    _check_vacuum_input(cfg)
    forms = encode(cfg).forms
    r = cfg.r_values
    input_var = cfg.input_variances()
    gains = [0.0] * 6
    degenerate = []
    for terms in _TERMS.values():
        for quad, fixed, slot, gained in terms:
            if slot is None:
                continue
            sign, ch = gained
            base = _accumulate([(float(w), _quad_form(forms, c, quad))
                                for w, c in fixed])
            gain_part = _accumulate([(1.0, _quad_form(forms, ch, quad))])
            var_m = _variance_of(gain_part, r, input_var)
            if var_m < _DEGENERATE_VAR:
                degenerate.append(slot)
                gains[slot] = 0.0
                continue
            cov = _covariance_of(base, gain_part, r, input_var)
            gains[slot] = -sign * cov / var_m
    return tuple(gains), tuple(degenerate)


def evaluate_witness(cfg: CodeConfig) -> WitnessResult:
    """Optimizes the gains and evaluates all four combinations."""
    gains, degenerate = optimize_gains(cfg)
    values = tuple(combination_value(i, gains, cfg) for i in (1, 2, 3, 4))
    satisfied = tuple(v < SEPARABLE_BOUND for v in values)
    return WitnessResult(values, gains, satisfied, degenerate)
