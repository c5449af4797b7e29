"""Closed-form optimal states and the JSON state-file format.

State file layout::

    {"n_players": 3, "amplitudes": [[re, im], ...]}

with ``2**n_players`` pairs in basis-index order, floats written with 17
significant digits so that ``load_state(save_state(s)) == s`` bit for bit.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .qcore import StateVector, _cos_sin, basis_index

SQRT2 = math.sqrt(2.0)
SQRT6 = math.sqrt(6.0)
SQRT8 = math.sqrt(8.0)

# load_state thresholds on |norm - 1|
SILENT_RENORM_ATOL = 1e-6
REJECT_NORM_ATOL = 1e-3


class StateFileError(ValueError):
    """Malformed or out-of-contract state file."""


def unit_phase(phi: float) -> complex:
    """``exp(i*phi)``, exact at multiples of pi/2."""
    c, s = _cos_sin(np.array([phi], dtype=float))
    return complex(c[0], s[0])


def cube_root_of_unity(sign: int = 1) -> complex:
    """``exp(sign * 2i*pi/3)`` written with exact real part -1/2."""
    _check_sign(sign)
    return complex(-0.5, sign * math.sqrt(3.0) / 2)


def _check_sign(sign: int) -> None:
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")


def _from_terms(terms: dict[str, complex], scale: float) -> StateVector:
    n = len(next(iter(terms)))
    amps = np.zeros(2**n, dtype=np.complex128)
    for label, amp in terms.items():
        amps[basis_index(label)] = amp / scale
    return StateVector(n, amps)


def psi2(phi: float) -> StateVector:
    """(|HV> + e^{i phi}|VH>)/sqrt(2); rotation invariant only for phi = pi."""
    return _from_terms({"HV": 1.0, "VH": unit_phase(phi)}, SQRT2)


def singlet() -> StateVector:
    return psi2(math.pi)


def psi3(root_sign: int = 1, i_sign: int = 1) -> StateVector:
    """One of the four three-photon optimal states.

    The default ``(+1, +1)`` is the state used for all three-player figures:
    z = exp(2i*pi/3) and a +i factor between each term and its mirror.
    """
    _check_sign(i_sign)
    z = cube_root_of_unity(root_sign)
    z2 = z.conjugate()
    k = 1j * i_sign
    return _from_terms(
        {
            "HHV": 1.0,
            "HVH": z,
            "VHH": z2,
            "VVH": k,
            "VHV": k * z,
            "HVV": k * z2,
        },
        SQRT6,
    )


def s4(root_sign: int = 1) -> StateVector:
    """Four-photon state on the balanced 2-2 outcomes, mirror terms equal."""
    z = cube_root_of_unity(root_sign)
    z2 = z.conjugate()
    return _from_terms(
        {
            "HHVV": 1.0,
            "VVHH": 1.0,
            "HVHV": z,
            "VHVH": z,
            "HVVH": z2,
            "VHHV": z2,
        },
        SQRT6,
    )


def a4(phi: float = 0.0, branch: int = 1) -> StateVector:
    """Four-photon state on the 3-1 outcomes, mirror terms of opposite sign.

    ``branch=+1`` pairs -1 with |HVHH> and -e^{i phi} with |VHHH>;
    ``branch=-1`` swaps those two phases.
    """
    _check_sign(branch)
    e = unit_phase(phi)
    a_hvhh, a_vhhh = (-1.0, -e) if branch == 1 else (-e, -1.0)
    coeffs = {"HHHV": 1.0, "HHVH": e, "HVHH": a_hvhh, "VHHH": a_vhhh}
    terms: dict[str, complex] = {}
    for label, amp in coeffs.items():
        terms[label] = amp
        terms[mirror_label(label)] = -amp
    return _from_terms(terms, SQRT8)


def basis_state(label: str) -> StateVector:
    return _from_terms({label.upper(): 1.0}, 1.0)


def mirror_label(label: str) -> str:
    return label.translate(str.maketrans("HV", "VH"))


# -- spec strings -----------------------------------------------------------

FAMILIES = ("psi2", "singlet", "psi3", "s4", "a4", "basis")


@dataclass(frozen=True)
class StateSpec:
    """Parsed ``family[:arg,arg]`` description of a state, angles in degrees.

    Examples: ``singlet``, ``psi2:0``, ``psi3:-,+``, ``s4:-``, ``a4:90,-``,
    ``basis:HHH``. Anything else is treated as a path to a state file.
    """

    family: str
    args: tuple[str, ...] = ()
    path: str | None = None

    def build(self) -> StateVector:
        if self.family == "file":
            return load_state(self.path)
        a = self.args
        if self.family == "singlet":
            return singlet()
        if self.family == "psi2":
            return psi2(math.radians(float(a[0])) if a else 0.0)
        if self.family == "psi3":
            return psi3(_sign(a, 0), _sign(a, 1))
        if self.family == "s4":
            return s4(_sign(a, 0))
        if self.family == "a4":
            phi = math.radians(float(a[0])) if a and a[0] else 0.0
            return a4(phi, _sign(a, 1))
        if self.family == "basis":
            if not a:
                raise ValueError("basis state needs a label, e.g. basis:HHH")
            return basis_state(a[0])
        raise ValueError(f"unknown state family {self.family!r}")

    def __str__(self) -> str:
        if self.family == "file":
            return str(self.path)
        return self.family + (":" + ",".join(self.args) if self.args else "")


def _sign(args: tuple[str, ...], pos: int) -> int:
    if len(args) <= pos or args[pos] in ("", "+", "+1", "1"):
        return 1
    if args[pos] in ("-", "-1"):
        return -1
    raise ValueError(f"expected + or -, got {args[pos]!r}")


def parse_state_spec(text: str) -> StateSpec:
    family, _, rest = text.strip().partition(":")
    if family.lower() in FAMILIES:
        args = tuple(x.strip() for x in rest.split(",")) if rest else ()
        return StateSpec(family.lower(), args)
    return StateSpec("file", path=text)


def build_state(text: str) -> StateVector:
    return parse_state_spec(text).build()


# -- files ------------------------------------------------------------------


def state_to_json(state: StateVector) -> str:
    pairs = ",\n    ".join(f"[{z.real:.17g}, {z.imag:.17g}]" for z in state.amplitudes)
    return f'{{\n  "n_players": {state.n_players},\n  "amplitudes": [\n    {pairs}\n  ]\n}}\n'


def save_state(state: StateVector, path: str | os.PathLike) -> None:
    Path(path).write_text(state_to_json(state), encoding="utf-8")


def state_from_json(text: str) -> StateVector:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFileError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "n_players" not in data or "amplitudes" not in data:
        raise StateFileError("expected an object with 'n_players' and 'amplitudes'")
    n = data["n_players"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise StateFileError(f"n_players must be a positive integer, got {n!r}")
    raw = data["amplitudes"]
    if not isinstance(raw, list) or len(raw) != 2**n:
        count = len(raw) if isinstance(raw, list) else "no"
        raise StateFileError(f"expected {2**n} amplitudes for n_players={n}, got {count}")
    try:
        pairs = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise StateFileError(f"amplitudes must be [re, im] number pairs: {exc}") from exc
    if pairs.shape != (2**n, 2) or not np.all(np.isfinite(pairs)):
        raise StateFileError("amplitudes must be finite [re, im] pairs")
    amps = pairs[:, 0] + 1j * pairs[:, 1]
    norm = float(np.linalg.norm(amps))
    deviation = abs(norm - 1.0)
    if deviation >= REJECT_NORM_ATOL:
        raise StateFileError(f"state norm {norm:.6f} deviates from 1 by {deviation:.3e}")
    if deviation > SILENT_RENORM_ATOL:
        warnings.warn(f"state norm {norm:.9f}; renormalizing", stacklevel=3)
    if abs(float(np.vdot(amps, amps).real) - 1.0) > 1e-12:
        amps = amps / norm
    return StateVector(n, amps)


def load_state(path: str | os.PathLike) -> StateVector:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StateFileError(f"cannot read {path}: {exc}") from exc
    return state_from_json(text)
