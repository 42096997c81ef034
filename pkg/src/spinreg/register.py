"""Static device model: Hamiltonian parameters, transition frequencies, calibration.

The register is one electron shared by three donor nuclei. In the secular
approximation the electron resonance splits into eight lines, one per
nuclear configuration, offset from the bare electron frequency by
``sum_i m_i A_i`` with ``m_i = +-1/2``; each nucleus shows two resonance
branches ``|gamma_n B0 + m_e A_i|`` selected by the electron state.
Frequencies are stored as offsets from ``gamma_e * B0`` wherever the
electron is involved, to avoid catastrophic cancellation at the ~40 GHz
scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .qstate import config_bits, config_index
from .readout import MarkovReadoutModel, ReadoutPolicy

B0_DEFAULT = 1.45                      # tesla
GAMMA_E_DEFAULT = 27.97e9              # Hz/T
GAMMA_N_DEFAULT = 17.23e6              # Hz/T
HYPERFINE_DEFAULT = (6.0e6, 68.0e6, 103.0e6)   # Hz

SECULAR_MIN_RATIO = 10.0


@dataclass(frozen=True)
class RegisterParams:
    b0: float = B0_DEFAULT
    gamma_e: float = GAMMA_E_DEFAULT
    gamma_n: float = GAMMA_N_DEFAULT
    hyperfine: tuple[float, float, float] = HYPERFINE_DEFAULT

    def __post_init__(self):
        if self.b0 <= 0:
            raise ValueError("b0 must be positive")
        if any(a <= 0 for a in self.hyperfine):
            raise ValueError("hyperfine couplings must be positive")
        ratio = self.gamma_e * self.b0 / max(self.hyperfine)
        if ratio <= SECULAR_MIN_RATIO:
            raise ValueError(
                f"electron Zeeman / hyperfine ratio {ratio:.1f} too small for the "
                f"secular approximation (need > {SECULAR_MIN_RATIO})")


def esr_offset(params: RegisterParams, config) -> float:
    """Electron resonance offset (Hz) from gamma_e*B0 for a nuclear configuration.

    Configuration bits use 1 for nuclear up (m = +1/2), so each nucleus
    contributes +-A_i/2.
    """
    if isinstance(config, (int, np.integer)):
        config = config_bits(int(config))
    return sum((0.5 if b else -0.5) * a for b, a in zip(config, params.hyperfine))


def nmr_frequency(params: RegisterParams, nucleus: int, electron_up: bool) -> float:
    """Resonance frequency (Hz) of one nucleus for a given electron state."""
    if nucleus not in (1, 2, 3):
        raise ValueError(f"nucleus index {nucleus} not in 1..3")
    m_e = 0.5 if electron_up else -0.5
    return abs(params.gamma_n * params.b0 + m_e * params.hyperfine[nucleus - 1])


@dataclass(frozen=True)
class TransitionTable:
    esr: dict          # nuclear config index -> offset from gamma_e*B0 (Hz)
    nmr: dict          # (nucleus, electron_up) -> frequency (Hz)

    def __post_init__(self):
        if len(self.esr) != 8:
            raise ValueError(f"expected 8 electron lines, got {len(self.esr)}")
        if len(self.nmr) != 6:
            raise ValueError(f"expected 6 nuclear lines, got {len(self.nmr)}")


def transition_table(params: RegisterParams) -> TransitionTable:
    esr = {c: esr_offset(params, c) for c in range(8)}
    nmr = {(n, up): nmr_frequency(params, n, up) for n in (1, 2, 3) for up in (False, True)}
    return TransitionTable(esr, nmr)


@dataclass(frozen=True)
class QubitCalibration:
    """Rabi frequency (Hz), dephasing time (s) and driven decay time (s)."""

    f_rabi: float
    t2_star: float
    t2_rabi: float | None = None

    def __post_init__(self):
        if self.f_rabi <= 0 or self.t2_star <= 0:
            raise ValueError("calibration frequencies and times must be positive")
        if self.t2_rabi is not None and self.t2_rabi <= 0:
            raise ValueError("t2_rabi must be positive when given")


def quality_factors(cal: QubitCalibration) -> tuple[float, float | None]:
    """(qubit quality T2*·f_Rabi, gate quality T2_Rabi·f_Rabi)."""
    q_gate = None if cal.t2_rabi is None else cal.t2_rabi * cal.f_rabi
    return cal.t2_star * cal.f_rabi, q_gate


@dataclass(frozen=True)
class Device:
    """Register parameters plus per-qubit calibration and readout model."""

    params: RegisterParams
    electron: dict                     # nuclear config index -> QubitCalibration
    electron_fallback: QubitCalibration
    nuclei: tuple[QubitCalibration, QubitCalibration, QubitCalibration]
    readout_models: tuple[MarkovReadoutModel, MarkovReadoutModel, MarkovReadoutModel]
    readout_policy: ReadoutPolicy
    benchmarks: dict                   # reference gate/SPAM fidelities for budgets

    def electron_cal(self, config=None) -> QubitCalibration:
        if config is None:
            return self.electron_fallback
        idx = config if isinstance(config, (int, np.integer)) else config_index(config)
        return self.electron.get(int(idx), self.electron_fallback)

    def nucleus_cal(self, nucleus: int) -> QubitCalibration:
        if nucleus not in (1, 2, 3):
            raise ValueError(f"nucleus index {nucleus} not in 1..3")
        return self.nuclei[nucleus - 1]

    def t2_star(self, qubit: int, electron_config=None) -> float:
        """Dephasing time of one qubit; qubit 0 is the electron."""
        if qubit == 0:
            return self.electron_cal(electron_config).t2_star
        return self.nucleus_cal(qubit).t2_star

    def pi2_duration(self, qubit: int, electron_config=None) -> float:
        cal = self.electron_cal(electron_config) if qubit == 0 else self.nucleus_cal(qubit)
        return 1.0 / (4.0 * cal.f_rabi)

    def two_pi_duration(self, config=None) -> float:
        return 1.0 / self.electron_cal(config).f_rabi


def _cal_from_json(doc) -> QubitCalibration:
    return QubitCalibration(doc["f_rabi_hz"], doc["t2_star_s"], doc.get("t2_rabi_s"))


def device_from_json(doc: dict) -> Device:
    params = RegisterParams(
        b0=doc["b0_tesla"],
        gamma_e=doc["gamma_e_hz_per_t"],
        gamma_n=doc["gamma_n_hz_per_t"],
        hyperfine=tuple(doc["hyperfine_hz"]),
    )
    cal = doc["calibration"]
    electron = {int(k, 2): _cal_from_json(v) for k, v in cal["electron"]["configs"].items()}
    fallback = _cal_from_json(cal["electron"]["fallback"])
    nuclei = tuple(_cal_from_json(cal[f"n{i}"]) for i in (1, 2, 3))
    ro = doc["readout"]
    models = tuple(
        MarkovReadoutModel(ro[f"n{i}"]["p_corr"], ro[f"n{i}"]["p_err"], ro[f"n{i}"]["p_flip"])
        for i in (1, 2, 3))
    pol = ro["policy"]
    policy = ReadoutPolicy(
        shots=tuple(pol["shots"]),
        thresholds=tuple(pol["thresholds"]),
        end_order=tuple(pol["end_order"]),
        start_order=tuple(pol["start_order"]),
    )
    return Device(params, electron, fallback, nuclei, models, policy,
                  benchmarks=doc.get("benchmarks", {}))


def load_device(path=None) -> Device:
    """Load a device description; the packaged default when no path is given."""
    if path is None:
        text = resources.files("spinreg.data").joinpath("device_table_s3.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return device_from_json(json.loads(text))
