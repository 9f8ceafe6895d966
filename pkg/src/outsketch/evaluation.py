"""Distribution metrics (inception-style score and Frechet distance) with
pluggable deterministic backends, the image-rebuild evaluation protocol, and
satisfaction-score aggregation from rating logs.

The desk-scale feature extractor is a fixed-seed pooled random projection:
absolute metric values are backend-relative, the protocol is what matters.
"""

from dataclasses import dataclass

import numpy as np
import torch

from .blocks import split_halves, to_hwc, to_nchw
from .data import N_LAYOUT_CLASSES, extract_sketch, scene_with_layout


@dataclass
class FeatureStats:
    mu: np.ndarray
    sigma: np.ndarray
    n: int


def compute_stats(images, extractor):
    """Feature mean and unbiased covariance over extractor outputs."""
    feats = np.stack([np.asarray(extractor(img), dtype=np.float64) for img in images])
    if feats.shape[0] < 2:
        raise ValueError(f"need at least 2 samples for covariance, got {feats.shape[0]}")
    mu = feats.mean(axis=0)
    sigma = np.atleast_2d(np.cov(feats, rowvar=False))
    return FeatureStats(mu=mu, sigma=sigma, n=feats.shape[0])


def inception_score(class_probs):
    """exp of the mean KL divergence between each row and the marginal.

    Rows must be nonnegative and sum to 1 within 1e-6; log arguments are
    clamped at 1e-12.
    """
    p = np.asarray(class_probs, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError(f"expected an NxK matrix, got shape {p.shape}")
    if (p < 0).any():
        raise ValueError("class probabilities must be nonnegative")
    row_sums = p.sum(axis=1)
    if np.abs(row_sums - 1.0).max() > 1e-6:
        raise ValueError("rows must sum to 1 within 1e-6")
    marginal = p.mean(axis=0)
    log_p = np.log(np.maximum(p, 1e-12))
    log_m = np.log(np.maximum(marginal, 1e-12))
    kl = (p * (log_p - log_m[None, :])).sum(axis=1)
    return float(np.exp(kl.mean()))


def _psd_sqrt(matrix, tol=1e-8):
    """Symmetric PSD square root by eigendecomposition; eigenvalues below
    -tol are an error, tiny negatives are clipped to zero."""
    sym = (matrix + matrix.T) * 0.5
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() < -tol:
        raise ValueError(f"matrix is not positive semi-definite (min eigenvalue {vals.min()})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)[None, :]) @ vecs.T


def frechet_distance(stats_r, stats_f):
    """||mu_r - mu_f||^2 + Tr(S_r + S_f - 2 (S_r S_f)^(1/2)).

    The cross term is evaluated through the symmetric product
    sqrt(S_r) S_f sqrt(S_r), which shares its eigenvalues with S_r S_f.
    """
    mu_r = np.asarray(stats_r.mu, dtype=np.float64)
    mu_f = np.asarray(stats_f.mu, dtype=np.float64)
    if mu_r.shape != mu_f.shape:
        raise ValueError(f"feature dimensions differ: {mu_r.shape} vs {mu_f.shape}")
    sigma_r = np.asarray(stats_r.sigma, dtype=np.float64)
    sigma_f = np.asarray(stats_f.sigma, dtype=np.float64)
    diff = mu_r - mu_f
    root_r = _psd_sqrt(sigma_r)
    cross = _psd_sqrt(root_r @ sigma_f @ root_r)
    return float(diff @ diff + np.trace(sigma_r) + np.trace(sigma_f)
                 - 2.0 * np.trace(cross))


def _pool_cells(image, pool):
    """Mean-pool an HxWxC image on a pool x pool grid (channel-wise)."""
    arr = np.asarray(image, dtype=np.float64)
    h, w = arr.shape[:2]
    rows = (np.arange(pool + 1) * h) // pool
    cols = (np.arange(pool + 1) * w) // pool
    out = np.empty((pool, pool, arr.shape[2]))
    for i in range(pool):
        for j in range(pool):
            out[i, j] = arr[rows[i]:rows[i + 1], cols[j]:cols[j + 1]].mean(axis=(0, 1))
    return out.ravel()


class RandomProjectionExtractor:
    """Deterministic feature backend: grid pooling then a fixed-seed Gaussian
    projection. No pretrained weights involved."""

    def __init__(self, dim=48, pool=8, seed=1234):
        self.dim = dim
        self.pool = pool
        in_dim = pool * pool * 3
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((in_dim, dim)) / np.sqrt(in_dim)

    def __call__(self, image):
        return _pool_cells(image, self.pool) @ self.projection


def get_extractor(name="pool-proj"):
    """Resolve a feature backend: the built-in deterministic one, or an
    external `module:attribute` import for pretrained extractors."""
    if name in (None, "pool-proj"):
        return RandomProjectionExtractor()
    if ":" in name:
        import importlib

        mod_name, attr = name.split(":", 1)
        obj = getattr(importlib.import_module(mod_name), attr)
        return obj() if isinstance(obj, type) else obj
    raise ValueError(f"unknown extractor {name!r} (use 'pool-proj' or 'module:attr')")


class SceneLayoutClassifier:
    """Logistic classifier over pooled features, trained on procedural scene
    layout labels; its predict_proba rows feed inception_score."""

    def __init__(self, pool=8):
        self.pool = pool
        self.model = None

    def fit(self, images, labels):
        from sklearn.linear_model import LogisticRegression

        feats = np.stack([_pool_cells(img, self.pool) for img in images])
        self.model = LogisticRegression(max_iter=1000)
        self.model.fit(feats, np.asarray(labels))
        return self

    def predict_proba(self, images):
        if self.model is None:
            raise RuntimeError("classifier is not fitted")
        feats = np.stack([_pool_cells(img, self.pool) for img in images])
        return self.model.predict_proba(feats)

    @classmethod
    def trained_default(cls, hw, n=180, seed=99):
        """Fit on freshly generated labeled scenes at the given resolution."""
        images, labels = [], []
        rng = np.random.default_rng(seed)
        while len(set(labels)) < N_LAYOUT_CLASSES or len(images) < n:
            img, meta = scene_with_layout(rng, hw[0], hw[1])
            images.append(img)
            labels.append(meta["label"])
            if len(images) > 4 * n:
                break
        return cls().fit(images, labels)


def rebuild_images(generator, corpus, detector, batch_size=8):
    """Rebuild each corpus image's right half from its own true sketch.

    No masking or cropping randomness is involved, so the output list is a
    deterministic function of (generator, corpus, detector).
    """
    was_training = generator.training
    generator.eval()
    outputs = []
    try:
        with torch.no_grad():
            for lo in range(0, len(corpus), batch_size):
                chunk = corpus[lo:lo + batch_size]
                lefts, sk_lefts, sk_rights = [], [], []
                for image in chunk:
                    image = np.asarray(image, dtype=np.float32)
                    sketch = extract_sketch(image, detector)
                    img_l, _ = split_halves(image, axis=1)
                    sk_l, sk_r = split_halves(sketch, axis=1)
                    lefts.append(to_nchw(img_l))
                    sk_lefts.append(to_nchw(sk_l))
                    sk_rights.append(to_nchw(sk_r))
                fake = generator(torch.cat(lefts), torch.cat(sk_lefts), torch.cat(sk_rights))
                outputs.extend(to_hwc(fake[i:i + 1]) for i in range(fake.shape[0]))
    finally:
        generator.train(was_training)
    return outputs


def evaluate_rebuild(generator, corpus, detector, extractor=None, classifier=None):
    """Rebuild-protocol report: Frechet distance between rebuilt and ground
    truth image sets, inception-style score of the rebuilt set, and the count."""
    if extractor is None:
        extractor = get_extractor()
    fakes = rebuild_images(generator, corpus, detector)
    if classifier is None:
        classifier = SceneLayoutClassifier.trained_default(fakes[0].shape[:2])
    fid = frechet_distance(compute_stats(corpus, extractor),
                           compute_stats(fakes, extractor))
    score = inception_score(classifier.predict_proba(fakes))
    return {"fid": fid, "is": score, "n": len(corpus)}


def mean_satisfaction(ratings):
    """Arithmetic mean of ratings on the three-level {0, 1, 2} scale."""
    values = [int(r) for r in ratings]
    if not values:
        raise ValueError("empty rating log")
    if any(v not in (0, 1, 2) for v in values):
        raise ValueError("ratings must lie in {0, 1, 2}")
    return float(np.mean(values))


def read_rating_log(path):
    """Parse `example_id,rating,rater_id,timestamp` lines into tuples."""
    entries = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("example_id"):
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"malformed rating log line {line_no}: {line!r}")
            example_id, rating, rater_id, timestamp = parts
            entries.append((example_id, int(rating), rater_id, timestamp))
    return entries
