"""scikit-learn style estimator wrapping the full proposal pipeline."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import DataError
from .metrics import EvalConfig, auc, recall_curve
from .network import ProposalNet
from .postprocess import SuppressionConfig, infer_video
from .synth import VideoRecord, make_windows
from .training import TrainConfig, train
from .validation import check_features, check_instances


class ProposalGenerator(BaseEstimator):
    """Temporal action proposal generator with a fit/predict interface.

    ``X`` is a list of per-video feature arrays of shape (length, n_channels)
    and ``y`` a matching list of annotation lists; each annotation is an
    ``ActionInstance``, an ``(start, end)`` pair, or a dict with ``start``
    and ``end`` keys (``t_start``/``t_end`` also accepted).
    """

    def __init__(
        self,
        window_length=32,
        max_duration=16,
        base_width=64,
        unet_width=64,
        reduced_channels=32,
        hidden_width=64,
        attn_width=None,
        bidirectional=True,
        beta=10.0,
        gamma=1e-4,
        batch_size=4,
        lr_schedule=((1e-3, 1000),),
        max_steps=300,
        n_cells=32,
        lam=0.15,
        sigma=0.5,
        score_floor=1e-4,
        max_out=100,
        threads=1,
        random_state=0,
    ):
        self.window_length = window_length
        self.max_duration = max_duration
        self.base_width = base_width
        self.unet_width = unet_width
        self.reduced_channels = reduced_channels
        self.hidden_width = hidden_width
        self.attn_width = attn_width
        self.bidirectional = bidirectional
        self.beta = beta
        self.gamma = gamma
        self.batch_size = batch_size
        self.lr_schedule = lr_schedule
        self.max_steps = max_steps
        self.n_cells = n_cells
        self.lam = lam
        self.sigma = sigma
        self.score_floor = score_floor
        self.max_out = max_out
        self.threads = threads
        self.random_state = random_state

    def _to_records(self, X, y):
        if y is not None and len(y) != len(X):
            raise DataError(f"got {len(X)} feature arrays but {len(y)} annotation lists")
        records = []
        for k, feats in enumerate(X):
            feats = check_features(np.asarray(feats, dtype=np.float64))
            anns = check_instances(y[k], length=feats.shape[0]) if y is not None else []
            records.append(VideoRecord(id=f"video-{k:04d}", features=feats, annotations=anns))
        return records

    def fit(self, X, y):
        records = self._to_records(X, y)
        windows = []
        for rec in records:
            windows.extend(make_windows(rec, self.window_length))
        if not windows:
            raise DataError("no training windows produced from the given videos")
        self.model_ = ProposalNet(
            in_channels=records[0].features.shape[1],
            window_length=self.window_length,
            max_duration=self.max_duration,
            base_width=self.base_width,
            unet_width=self.unet_width,
            reduced_channels=self.reduced_channels,
            hidden_width=self.hidden_width,
            attn_width=self.attn_width,
            bidirectional=self.bidirectional,
            seed=self.random_state,
        )
        cfg = TrainConfig(
            beta=self.beta,
            gamma=self.gamma,
            batch_size=self.batch_size,
            lr_schedule=tuple(self.lr_schedule),
            max_steps=self.max_steps,
            n_cells=self.n_cells,
            lam=self.lam,
            seed=self.random_state,
            threads=self.threads,
        )
        self.train_result_ = train(self.model_, windows, cfg)
        self.n_features_in_ = records[0].features.shape[1]
        return self

    def predict(self, X):
        """Return one list of ``Proposal`` objects per input video."""
        check_is_fitted(self, "model_")
        cfg = SuppressionConfig(
            sigma=self.sigma, score_floor=self.score_floor, max_out=self.max_out
        )
        out = []
        for k, feats in enumerate(X):
            feats = check_features(np.asarray(feats, dtype=np.float64))
            out.append(infer_video(self.model_, feats, cfg, video_id=f"video-{k:04d}"))
        return out

    def score(self, X, y):
        """Recall-curve area (0..1) of predicted proposals against ``y``."""
        check_is_fitted(self, "model_")
        proposals = self.predict(X)
        per_video = []
        for props, anns in zip(proposals, y):
            gts = [
                (inst.t_start, inst.t_end)
                for inst in check_instances(anns)
            ]
            per_video.append(([(p.t_start, p.t_end, p.score) for p in props], gts))
        curve = recall_curve(per_video, EvalConfig())
        return auc(curve) / 100.0
