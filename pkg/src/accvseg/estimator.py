"""scikit-learn style wrappers around the initializer and the full pipeline.

An "X" here is a single image of shape ``(M1, M2)`` or ``(M1, M2, omega)``,
not a feature matrix; segmentation is transductive, so ``fit`` does all the
work and ``labels_`` holds the result.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import admm, iglim, model
from .validation import check_image, check_phase_stack, check_scheme


class MultiIGLIM(TransformerMixin, BaseEstimator):
    """Graph-Laplacian edge detection, K-means split and diagonal denoising.

    ``transform`` returns the binary initial phase stack ``(n, M1, M2)``;
    the individual masks are kept in ``masks_`` after ``fit``.
    """

    def __init__(self, kappa=50.0, sigma=0.05, M=5, m=4, seed=0):
        self.kappa = kappa
        self.sigma = sigma
        self.M = M
        self.m = m
        self.seed = seed

    def _params(self):
        return iglim.InitParams(kappa=self.kappa, sigma=self.sigma, M=self.M, m=self.m, seed=self.seed)

    def fit(self, X, y=None):
        image = check_image(X)
        self.masks_ = iglim.multi_iglim(image, self._params())
        self.n_fields_ = iglim.n_phase_fields(self.m)
        self.shape_ = image.shape[:2]
        return self

    def transform(self, X):
        check_is_fitted(self, "masks_")
        image = check_image(X)
        if image.shape[:2] != self.shape_:
            # the masks belong to the fitted image; recompute for a new one
            return iglim.combine_phases(iglim.multi_iglim(image, self._params()))
        return iglim.combine_phases(self.masks_)


class ACCVSegmenter(ClusterMixin, BaseEstimator):
    """Phase-field segmentation: Multi-IGLIM start, ETD inner solves, mean updates.

    Defaults suit a clean piecewise-constant synthetic image:
    kappa=50, sigma=0.05, M=5, epsilon=6, lam=40, h=0.3, S=120, dt=0.3.

    Attributes after ``fit``: ``labels_`` (region code per pixel),
    ``phases_`` (final phase stack), ``means_`` (region means by code),
    ``trace_`` (:class:`~accvseg.admm.RunTrace`), ``n_iter_`` (outer rounds),
    ``init_`` (initial phase stack).
    """

    def __init__(self, m=4, epsilon=6.0, lam=40.0, p=3, h=0.3, S=120.0, dt=0.3,
                 scheme="etdrk2", mbp_mode="user-S", tol_steady=1e-4, tol_outer=1e-3,
                 max_inner=500, max_outer=50, kappa=50.0, sigma=0.05, M=5, seed=0):
        self.m = m
        self.epsilon = epsilon
        self.lam = lam
        self.p = p
        self.h = h
        self.S = S
        self.dt = dt
        self.scheme = scheme
        self.mbp_mode = mbp_mode
        self.tol_steady = tol_steady
        self.tol_outer = tol_outer
        self.max_inner = max_inner
        self.max_outer = max_outer
        self.kappa = kappa
        self.sigma = sigma
        self.M = M
        self.seed = seed

    def model_params(self) -> model.ModelParams:
        return model.ModelParams(
            epsilon=self.epsilon, lam=self.lam, p=self.p, h=self.h, S=self.S, dt=self.dt,
            tol_steady=self.tol_steady, tol_outer=self.tol_outer,
            max_inner=self.max_inner, max_outer=self.max_outer, mbp_mode=self.mbp_mode)

    def fit(self, X, y=None, U0=None):
        """Segment ``X``.  ``U0`` overrides the Multi-IGLIM initialization."""
        image = check_image(X)
        check_scheme(self.scheme)
        params = self.model_params()
        if U0 is None:
            init = MultiIGLIM(self.kappa, self.sigma, self.M, self.m, self.seed)
            U0 = init.fit(image).transform(image)
        U0 = check_phase_stack(U0, image.shape[:2], "U0")
        U, C, labels, trace = admm.admm_solve(image, U0, params, self.scheme)
        self.init_ = U0
        self.phases_ = U
        self.means_ = C
        self.labels_ = labels
        self.trace_ = trace
        self.n_iter_ = trace.n_outer
        self.converged_ = trace.converged
        return self

    def predict(self, X):
        """Assign every pixel of ``X`` to the fitted region mean closest to it."""
        check_is_fitted(self, "means_")
        image = check_image(X)
        if image.shape[2] != self.means_.shape[1]:
            raise ValueError(f"expected {self.means_.shape[1]} channels, got {image.shape[2]}")
        return model.squared_residuals(self.means_, image).argmin(axis=0)

    def score(self, X, y=None):
        """Negative discrete energy of the fitted state (higher is better)."""
        check_is_fitted(self, "phases_")
        image = check_image(X)
        return -model.discrete_energy(self.phases_, self.means_, image, self.model_params())
