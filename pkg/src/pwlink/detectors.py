"""Parzen-window symbol detection and the minimum-distance baseline.

The Parzen-window (PW) detector scores each class by summing inverse
Euclidean distances to labeled received training points inside a circular
window of radius R, then picks the argmax class.  It operates directly on
the received cloud, so it needs neither phase derotation nor amplitude
normalization.  One detector instance serves one polarization.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .constellation import Alphabet
from .errors import ConfigError, InputError

D0_RMS_FRACTION = 1e-9  # distance clamp relative to the training cloud rms radius
RADIUS_GRID_LO = 0.05  # search bounds relative to the scaled minimum distance
RADIUS_GRID_HI = 2.0
RADIUS_GRID_STEPS = 40


def window_value(y_n: complex, y_t: complex, radius: float, d0: float) -> float:
    """Inverse-distance window: 1/max(D, d0) inside the radius, else 0."""
    d = abs(y_n - y_t)
    if d >= radius:
        return 0.0
    return 1.0 / max(d, d0)


@dataclass
class PwDetector:
    """Labeled received training cloud plus an optimized window radius."""

    training_points: np.ndarray  # (T,) complex
    training_labels: np.ndarray  # (T,) int
    n_classes: int
    radius: float
    d0_clamp: float = 0.0  # 0 -> derived from the cloud rms radius
    nn_fallback: bool = True  # label empty-window queries by nearest neighbor
    _tree: cKDTree = field(init=False, repr=False)
    _xy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.training_points = np.asarray(self.training_points, dtype=np.complex128).ravel()
        self.training_labels = np.asarray(self.training_labels, dtype=np.int64).ravel()
        if self.training_points.size == 0:
            raise ConfigError("empty training set")
        if self.training_points.size != self.training_labels.size:
            raise ConfigError("training points and labels differ in length")
        present = np.unique(self.training_labels)
        if present.min() < 0 or present.max() >= self.n_classes:
            raise ConfigError("training label out of range")
        if present.size < self.n_classes:
            raise ConfigError("every class must appear in the training set")
        if self.radius <= 0:
            raise ConfigError("window radius must be positive")
        if self.d0_clamp <= 0:
            rms = np.sqrt(np.mean(np.abs(self.training_points) ** 2))
            self.d0_clamp = D0_RMS_FRACTION * float(rms)
        self._xy = np.column_stack(
            [self.training_points.real, self.training_points.imag]
        )
        self._tree = cKDTree(self._xy)

    def classify(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Accelerated classification of many points at once.

        Returns (labels, scores) with scores shaped (n, n_classes).  Uses a
        k-d tree to prune training points outside the window; empty-window
        queries fall back to the nearest training point's label.
        """
        points = np.asarray(points, dtype=np.complex128).ravel()
        qxy = np.column_stack([points.real, points.imag])
        neighbor_lists = self._tree.query_ball_point(qxy, r=self.radius)
        counts = np.fromiter((len(l) for l in neighbor_lists), dtype=np.int64, count=len(points))
        scores = np.zeros((points.size, self.n_classes))
        if counts.sum() > 0:
            flat = np.concatenate([l for l in neighbor_lists if l]).astype(np.int64)
            owner = np.repeat(np.arange(points.size), counts)
            d = np.abs(points[owner] - self.training_points[flat])
            inside = d < self.radius  # window is a strict-inequality disc
            w = 1.0 / np.maximum(d[inside], self.d0_clamp)
            key = owner[inside] * self.n_classes + self.training_labels[flat[inside]]
            scores = np.bincount(
                key, weights=w, minlength=points.size * self.n_classes
            ).reshape(points.size, self.n_classes)
        labels = np.argmax(scores, axis=1)  # ties resolve to the lowest index
        empty = ~scores.any(axis=1)
        if np.any(empty):
            if not self.nn_fallback:
                raise InputError(f"{int(empty.sum())} queries fall outside every window")
            _, nearest = self._tree.query(qxy[empty])
            labels[empty] = self.training_labels[nearest]
        return labels, scores


def pw_classify(y_n: complex, det: PwDetector) -> tuple[int, np.ndarray]:
    """Reference classification of a single point by the naive double loop.

    Sums the window value of every training point into its class score,
    then returns the argmax label (lowest index on ties) and the scores.
    Empty windows fall back to the nearest training point's label.
    """
    scores = np.zeros(det.n_classes)
    for y_t, label in zip(det.training_points, det.training_labels):
        scores[label] += window_value(y_n, y_t, det.radius, det.d0_clamp)
    if scores.any():
        return int(np.argmax(scores)), scores
    if not det.nn_fallback:
        raise InputError("query falls outside every window")
    nearest = int(np.argmin(np.abs(det.training_points - y_n)))
    return int(det.training_labels[nearest]), scores


def med_classify(y_n, alphabet: Alphabet, scale: float) -> np.ndarray:
    """Nearest ideal constellation point after dividing out the cloud scale."""
    if scale <= 0:
        raise ConfigError("scale must be positive")
    y = np.asarray(y_n, dtype=np.complex128)
    z = np.atleast_1d(y).ravel() / scale
    d = np.abs(z[:, None] - alphabet.points[None, :])
    labels = np.argmin(d, axis=1)  # ties resolve to the lowest label index
    return labels if np.ndim(y_n) else int(labels[0])


def _validation_errors(d, fit_labels, val_labels, n_classes, radius, d0) -> int:
    """Errors of the pure window rule on precomputed distances.

    Validation queries that no window covers count as errors: the
    nearest-neighbor fallback is a test-time safety net for BER
    accounting, not part of the window rule whose radius is being chosen.
    Without this, every radius ties at zero errors in low-noise regimes
    and the tie rule collapses the window to a degenerate size.
    """
    w = np.where(d < radius, 1.0 / np.maximum(d, d0), 0.0)
    onehot = np.zeros((fit_labels.size, n_classes))
    onehot[np.arange(fit_labels.size), fit_labels] = 1.0
    scores = w @ onehot
    pred = np.argmax(scores, axis=1)
    wrong = (pred != val_labels) | ~scores.any(axis=1)
    return int(np.sum(wrong))


def optimize_radius(
    training_points: np.ndarray, training_labels: np.ndarray, alphabet: Alphabet
) -> float:
    """Pick the window radius that minimizes held-out symbol errors.

    The labeled data is split into interleaved fit/validation halves and R
    is grid-searched geometrically over [0.05, 2] times the alphabet
    minimum distance scaled to the received cloud's rms radius.  Ties go to
    the smallest radius.
    """
    points = np.asarray(training_points, dtype=np.complex128).ravel()
    labels = np.asarray(training_labels, dtype=np.int64).ravel()
    if points.size < 2 * alphabet.order:
        raise ConfigError("radius optimization needs at least 2*M labeled points")
    if np.unique(labels).size < alphabet.order:
        raise ConfigError("radius optimization needs every class present")

    fit_p, fit_l = points[0::2], labels[0::2]
    val_p, val_l = points[1::2], labels[1::2]
    cloud_rms = float(np.sqrt(np.mean(np.abs(points) ** 2)))
    alpha_rms = float(np.sqrt(np.mean(np.abs(alphabet.points) ** 2)))
    d_min = alphabet.min_distance * cloud_rms / alpha_rms
    grid = np.geomspace(RADIUS_GRID_LO * d_min, RADIUS_GRID_HI * d_min, RADIUS_GRID_STEPS)
    d0 = D0_RMS_FRACTION * cloud_rms

    distances = np.abs(val_p[:, None] - fit_p[None, :])
    best_r, best_err = None, None
    for r in grid:
        err = _validation_errors(distances, fit_l, val_l, alphabet.order, r, d0)
        if best_err is None or err < best_err:
            best_r, best_err = float(r), err
    return best_r


def train_pw_detector(
    training_points: np.ndarray, training_labels: np.ndarray, alphabet: Alphabet
) -> PwDetector:
    """Optimize the radius, then build the detector on the full training set."""
    radius = optimize_radius(training_points, training_labels, alphabet)
    return PwDetector(
        training_points=training_points,
        training_labels=training_labels,
        n_classes=alphabet.order,
        radius=radius,
    )


def rasterize_regions(det: PwDetector, n_cells: int = 64, margin: float = 0.15):
    """Evaluate the detector on a square grid covering its training cloud.

    Returns (grid_x, grid_y, labels) with labels shaped (n_cells, n_cells),
    labels[i, j] belonging to the point (grid_x[j], grid_y[i]).
    """
    pts = det.training_points
    lo = float(min(pts.real.min(), pts.imag.min()))
    hi = float(max(pts.real.max(), pts.imag.max()))
    pad = margin * (hi - lo)
    grid_x = np.linspace(lo - pad, hi + pad, n_cells)
    grid_y = np.linspace(lo - pad, hi + pad, n_cells)
    labels = rasterize_grid(lambda q: det.classify(q)[0], grid_x, grid_y)
    return grid_x, grid_y, labels


def rasterize_grid(predict, grid_x: np.ndarray, grid_y: np.ndarray) -> np.ndarray:
    """Rasterize an arbitrary labeler over explicit grid coordinates."""
    qx, qy = np.meshgrid(grid_x, grid_y)
    return np.asarray(predict(qx.ravel() + 1j * qy.ravel())).reshape(
        grid_y.size, grid_x.size
    )
