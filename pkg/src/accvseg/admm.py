"""Alternating minimization driver: steady-state phase solves interleaved
with closed-form region-mean updates."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import etd, model
from .validation import check_image, check_phase_stack, check_region_means, check_scheme


def extract_labels(U) -> np.ndarray:
    """Region code per pixel; bit ``i`` is set iff ``U_i > 1/2`` (ties map to 0)."""
    U = np.asarray(U)
    labels = np.zeros(U.shape[1:], dtype=np.int64)
    for i in range(U.shape[0]):
        labels |= (U[i] > 0.5).astype(np.int64) << i
    return labels


def _boundary(binary):
    p = np.pad(binary, 1, mode="edge")
    core = p[1:-1, 1:-1]
    return ((p[:-2, 1:-1] != core) | (p[2:, 1:-1] != core)
            | (p[1:-1, :-2] != core) | (p[1:-1, 2:] != core))


def extract_contours(U=None, labels=None, n=None) -> np.ndarray:
    """Per-field interface masks, shape ``(n, M1, M2)``.

    A pixel is on the interface of field ``i`` when its thresholded value
    differs from at least one 4-neighbour.  Pass either the phase stack or a
    label map (then ``n`` defaults to the number of bits in use).
    """
    if U is not None:
        binary = np.asarray(U) > 0.5
    elif labels is not None:
        labels = np.asarray(labels)
        if n is None:
            n = max(1, int(labels.max()).bit_length())
        binary = np.stack([(labels >> i) & 1 for i in range(n)]).astype(bool)
    else:
        raise ValueError("need U or labels")
    return np.stack([_boundary(b) for b in binary])


@dataclass
class RunTrace:
    """Per-outer-iteration record.

    ``records`` holds one dict per checkpoint with keys ``outer_iter``,
    ``stage`` (``"start"``, ``"u"``, ``"C"``), ``E_h``, ``min_i``, ``max_i``,
    ``inner_iters``, ``label_changes``.
    """

    records: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    n_outer: int = 0

    @property
    def energies(self) -> np.ndarray:
        return np.array([r["E_h"] for r in self.records])

    @property
    def inner_iterations(self) -> int:
        return sum(r.iterations for r in self.reports)

    @property
    def mbp_violations(self) -> int:
        return sum(r.mbp_violations for r in self.reports)

    def add(self, outer_iter, stage, U, C, image, params, inner_iters=0, label_changes=0):
        self.records.append(dict(
            outer_iter=outer_iter, stage=stage,
            E_h=model.discrete_energy(U, C, image, params),
            min_i=float(np.min(U)), max_i=float(np.max(U)),
            inner_iters=inner_iters, label_changes=label_changes))

    def to_csv(self, path):
        cols = ["outer_iter", "stage", "E_h", "min_i", "max_i", "inner_iters"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for rec in self.records:
                writer.writerow({**rec, "E_h": repr(rec["E_h"]),
                                 "min_i": repr(rec["min_i"]), "max_i": repr(rec["max_i"])})


def admm_solve(image, U0, params: model.ModelParams, scheme: str = "etdrk2",
               C0=None, track_energy: bool = False):
    """Alternate ``solve_to_steady`` (u-stage) and ``update_means`` (C-stage).

    Stops when the phase fields move less than ``tol_outer`` in the max
    norm, when the label map did not change, or after ``max_outer`` rounds.
    Returns ``(U, C, labels, trace)``.
    """
    image = check_image(image)
    U = check_phase_stack(U0, image.shape[:2], "initial phase fields").copy()
    check_scheme(scheme)
    eps1 = params.eps1
    trace = RunTrace()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", model.EmptyRegionWarning)
        C = (model.update_means(U, image, eps1) if C0 is None
             else check_region_means(C0, U.shape[0], image.shape[2]).copy())
    trace.warnings.extend(f"outer 0: {w.message}" for w in caught)
    plan = etd.make_plan(image.shape[:2], params, image.shape[2])
    labels = extract_labels(U)
    trace.add(0, "start", U, C, image, params)

    for k in range(1, params.max_outer + 1):
        U_new, report = etd.solve_to_steady(U, C, image, params, scheme, plan, track_energy)
        trace.reports.append(report)
        new_labels = extract_labels(U_new)
        changes = int((new_labels != labels).sum())
        trace.add(k, "u", U_new, C, image, params, report.iterations, changes)

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", model.EmptyRegionWarning)
            C = model.update_means(U_new, image, eps1, previous=C)
        trace.warnings.extend(f"outer {k}: {w.message}" for w in caught)
        trace.add(k, "C", U_new, C, image, params, 0, changes)

        delta = float(np.abs(U_new - U).max())
        U, labels = U_new, new_labels
        trace.n_outer = k
        if delta <= params.tol_outer:
            trace.converged, trace.reason = True, "phase fields stationary"
            break
        if changes == 0:
            trace.converged, trace.reason = True, "label map unchanged"
            break
    else:
        trace.reason = "max_outer reached"
    return U, C, labels, trace
