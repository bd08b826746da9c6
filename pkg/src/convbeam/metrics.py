"""Separation scoring: SI-SDR, projection-based SDR, and permutation-
invariant speaker assignment."""

import dataclasses
import itertools

import numpy as np

from .errors import DegenerateSignalError

CLAMP_DB = 100.0


def _as_signal(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-D signal")
    return x


def _ratio_db(num, den):
    if den <= 0.0:
        return CLAMP_DB if num > 0.0 else -CLAMP_DB
    if num <= 0.0:
        return -CLAMP_DB
    return float(np.clip(10.0 * np.log10(num / den), -CLAMP_DB, CLAMP_DB))


def si_sdr(estimate, reference):
    """Scale-invariant signal-to-distortion ratio in dB.

    The reference is rescaled by the least-squares gain before the
    energy ratio; exact (or exactly scaled) matches clamp at +100 dB and
    hopeless estimates at -100 dB, so reports stay finite.
    """
    est = _as_signal(estimate, "estimate")
    ref = _as_signal(reference, "reference")
    if est.shape != ref.shape:
        raise ValueError("estimate and reference must have equal length")
    ref_energy = float(ref @ ref)
    if ref_energy == 0.0:
        raise DegenerateSignalError("reference signal is all zero")
    alpha = float(est @ ref) / ref_energy
    target = alpha * ref
    return _ratio_db(float(target @ target),
                     float((target - est) @ (target - est)))


def sdr_simple(estimate, reference, filter_taps=16):
    """Projection SDR: least-squares fit onto delayed copies of the reference.

    The estimate is projected onto the span of the reference delayed by
    0..filter_taps-1 samples (solving the filter_taps x filter_taps normal
    equations); returns the projection-to-residual energy ratio in dB.
    With one tap this reduces to si_sdr.
    """
    est = _as_signal(estimate, "estimate")
    ref = _as_signal(reference, "reference")
    if est.shape != ref.shape:
        raise ValueError("estimate and reference must have equal length")
    if filter_taps < 1:
        raise ValueError("filter_taps must be >= 1")
    if float(ref @ ref) == 0.0:
        raise DegenerateSignalError("reference signal is all zero")
    n = est.shape[0]
    delayed = np.zeros((n, filter_taps))
    for l in range(filter_taps):
        delayed[l:, l] = ref[:n - l]
    gram = delayed.T @ delayed
    rhs = delayed.T @ est
    try:
        coef = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        raise DegenerateSignalError(
            "singular normal equations (degenerate reference)") from None
    if not np.all(np.isfinite(coef)):
        raise DegenerateSignalError(
            "singular normal equations (degenerate reference)")
    proj = delayed @ coef
    resid = est - proj
    return _ratio_db(float(proj @ proj), float(resid @ resid))


@dataclasses.dataclass
class SpeakerScore:
    """Scores for one output stream after permutation alignment."""

    speaker: int
    si_sdr: float
    sdr: float
    input_si_sdr: float | None = None
    input_sdr: float | None = None

    @property
    def delta_si_sdr(self):
        return (None if self.input_si_sdr is None
                else self.si_sdr - self.input_si_sdr)

    @property
    def delta_sdr(self):
        return None if self.input_sdr is None else self.sdr - self.input_sdr


@dataclasses.dataclass
class ScoreReport:
    """Per-speaker scores under the best estimate-to-reference permutation.

    ``permutation[i]`` is the reference index assigned to estimate i;
    speaker entries are listed in reference order.
    """

    permutation: tuple
    speakers: list


def pit_assign(estimates, references, inputs=None, filter_taps=16):
    """Exhaustive permutation-invariant alignment (maximizing mean SI-SDR).

    estimates/references: equal-length lists of 1-D signals (at most 4,
    factorial search).  ``inputs`` optionally provides the unprocessed
    signal scored against each reference for improvement deltas.
    Returns (permutation, ScoreReport).
    """
    if len(estimates) != len(references):
        raise ValueError("estimate and reference counts differ")
    count = len(references)
    if count < 1:
        raise ValueError("need at least one signal pair")
    if count > 4:
        raise ValueError("factorial search limited to 4 speakers")
    table = np.array([[si_sdr(est, ref) for ref in references]
                      for est in estimates])
    best_perm = None
    best_score = -np.inf
    for perm in itertools.permutations(range(count)):
        score = float(np.mean([table[i, perm[i]] for i in range(count)]))
        if score > best_score:
            best_score = score
            best_perm = perm
    speakers = []
    for ref_idx in range(count):
        est_idx = best_perm.index(ref_idx)
        entry = SpeakerScore(
            speaker=ref_idx,
            si_sdr=float(table[est_idx, ref_idx]),
            sdr=sdr_simple(estimates[est_idx], references[ref_idx],
                           filter_taps))
        if inputs is not None:
            entry.input_si_sdr = si_sdr(inputs[ref_idx], references[ref_idx])
            entry.input_sdr = sdr_simple(inputs[ref_idx], references[ref_idx],
                                         filter_taps)
        speakers.append(entry)
    return best_perm, ScoreReport(permutation=best_perm, speakers=speakers)


def trim_edges(signal, margin):
    """Drop ``margin`` samples at each end (synthesis edge effects)."""
    signal = np.asarray(signal, dtype=np.float64)
    if margin < 0 or 2 * margin >= signal.shape[0]:
        raise ValueError("margin too large for signal")
    return signal[margin:signal.shape[0] - margin]


def render_score_table(report):
    """Human-readable score table."""
    lines = [f"permutation: {' '.join(str(p + 1) for p in report.permutation)}",
             f"{'speaker':>8} {'si_sdr':>10} {'sdr':>10} "
             f"{'d_si_sdr':>10} {'d_sdr':>10}"]
    for s in report.speakers:
        d_si = "n/a" if s.delta_si_sdr is None else f"{s.delta_si_sdr:10.2f}"
        d_sd = "n/a" if s.delta_sdr is None else f"{s.delta_sdr:10.2f}"
        lines.append(f"{s.speaker + 1:>8} {s.si_sdr:10.2f} {s.sdr:10.2f} "
                     f"{d_si:>10} {d_sd:>10}")
    lines.append("pesq: n/a (out of scope)")
    lines.append("stoi: n/a (out of scope)")
    return "\n".join(lines) + "\n"


def render_score_tsv(report):
    """Flat machine format: one ``speaker<TAB>metric<TAB>value_dB`` record."""
    rows = []
    for s in report.speakers:
        rows.append((s.speaker + 1, "si_sdr", s.si_sdr))
        rows.append((s.speaker + 1, "sdr", s.sdr))
        if s.input_si_sdr is not None:
            rows.append((s.speaker + 1, "input_si_sdr", s.input_si_sdr))
            rows.append((s.speaker + 1, "input_sdr", s.input_sdr))
            rows.append((s.speaker + 1, "delta_si_sdr", s.delta_si_sdr))
            rows.append((s.speaker + 1, "delta_sdr", s.delta_sdr))
    return "".join(f"{spk}\t{metric}\t{value:.6f}\n"
                   for spk, metric, value in rows)
