"""The from-scratch neural families behind the uniform train/predict contract.

Each model implements:
  prepare(ds)            -- EncodedDataset -> internal arrays
  init_params(prep, cfg) -- allocate parameters (deterministic under cfg.seed)
  loss_and_grads(prep, idx) -- minibatch loss + gradient dict (side-effect free)
  unit_logits(prep)      -- logits for every training unit
  app_scores(ds)         -- malicious probability per dataset row

Training units equal dataset rows except for the GNN, which trains on
individual rooted subgraphs carrying their app's label and aggregates with a
max at scoring time.
"""

from __future__ import annotations

import numpy as np

from ..data import (
    KIND_DENSE,
    KIND_GRAPH_BATCH,
    KIND_ONEHOT_SEQ,
    KIND_TOKEN_SEQ,
    EncodedDataset,
)
from .nncore import (
    Adam,
    MLPBlock,
    bce_with_logits,
    glorot,
    sigmoid,
    softmax_rows,
    softmax_rows_backward,
)
from .spec import (
    AEClassifierSpec,
    AttentionMLPSpec,
    CNNSpec,
    GNNSpec,
    LSTMSpec,
    MultimodalMLPSpec,
    SubstituteMLPSpec,
    TrainConfig,
)


class ShapeMismatchError(ValueError):
    pass


def _require_kind(ds: EncodedDataset, kind: str, who: str) -> None:
    if ds.kind != kind:
        raise ShapeMismatchError(f"{who} expects {kind}, got {ds.kind}")


class NeuralModel:
    """Shared plumbing: parameter dict, unit bookkeeping, scoring."""

    def __init__(self, spec):
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.training_log: list[tuple[int, float, float]] = []
        self.pos_weight = 1.0  # set from train labels by the fit loop
        self._fitted = False

    def _bce(self, logits, y):
        return bce_with_logits(logits, y, self.pos_weight)

    # -- interface implemented per family --------------------------------
    def prepare(self, ds: EncodedDataset):
        raise NotImplementedError

    def dims_of(self, prep) -> dict:
        raise NotImplementedError

    def init_params(self, dims, cfg: TrainConfig, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def loss_and_grads(self, prep, idx: np.ndarray):
        raise NotImplementedError

    def unit_logits(self, prep) -> np.ndarray:
        raise NotImplementedError

    # -- defaults ---------------------------------------------------------
    def unit_labels(self, prep) -> np.ndarray:
        return prep["labels"]

    def n_units(self, prep) -> int:
        return len(self.unit_labels(prep))

    def unit_sort_key(self, prep) -> np.ndarray | None:
        """Optional per-unit key for length-bucketed batching."""
        return None

    def app_labels(self, prep) -> np.ndarray:
        return prep["labels"]

    def scores_from_prep(self, prep) -> np.ndarray:
        return sigmoid(self.unit_logits(prep))

    def app_scores(self, ds: EncodedDataset) -> np.ndarray:
        prep = self.prepare(ds)
        logits = self.unit_logits(prep)
        return sigmoid(logits)

    def predict(self, ds: EncodedDataset) -> np.ndarray:
        return (self.app_scores(ds) > 0.5).astype(np.int64)

    def dims_of_state(self) -> dict:
        return self._dims

    def parameter_count(self) -> int:
        return sum(int(v.size) for v in self.params.values())


# ---------------------------------------------------------------------------
# Substitute (2-layer MLP) -- also the JSMA gradient source


class SubstituteMLP(NeuralModel):
    spec: SubstituteMLPSpec

    def prepare(self, ds: EncodedDataset):
        _require_kind(ds, KIND_DENSE, "substitute mlp")
        x = ds.payload
        if isinstance(x, tuple):
            raise ShapeMismatchError("substitute mlp expects a single dense matrix")
        return {"x": np.asarray(x, dtype=float), "labels": ds.labels.astype(float)}

    def dims_of(self, prep) -> dict:
        return {"input_dim": int(prep["x"].shape[1])}

    def init_params(self, dims, cfg, rng):
        d = dims["input_dim"]
        self.input_dim = d
        self.mlp = MLPBlock("mlp", [d, cfg.width(self.spec.hidden), 1], rng, self.params)

    def _check_dim(self, x):
        if x.shape[1] != self.input_dim:
            raise ShapeMismatchError(
            f"expected {self.input_dim} features, got {x.shape[1]}"
            )

    def loss_and_grads(self, prep, idx):
        x = prep["x"][idx]
        y = prep["labels"][idx]
        self._check_dim(x)
        out, cache = self.mlp.forward(x)
        loss, dlogits = self._bce(out[:, 0], y)
        grads: dict[str, np.ndarray] = {}
        self.mlp.backward(dlogits[:, None], cache, grads)
        return loss, grads

    def unit_logits(self, prep):
        x = prep["x"]
        self._check_dim(x)
        out, _ = self.mlp.forward(x)
        return out[:, 0]

    def input_gradient(self, x: np.ndarray) -> np.ndarray:
        """d(logit)/dx per row -- the JSMA saliency source."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        self._check_dim(x)
        _, cache = self.mlp.forward(x)
        grads: dict[str, np.ndarray] = {}
        dx = self.mlp.backward(np.ones((x.shape[0], 1)), cache, grads)
        return dx[0] if squeeze else dx

    def logit_of(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        self._check_dim(x)
        out, _ = self.mlp.forward(x)
        return out[0, 0] if squeeze else out[:, 0]


# ---------------------------------------------------------------------------
# Attention MLP (api+permission binary vectors)


class AttentionMLP(NeuralModel):
    spec: AttentionMLPSpec

    def prepare(self, ds):
        _require_kind(ds, KIND_DENSE, "attention mlp")
        return {"x": np.asarray(ds.payload, dtype=float), "labels": ds.labels.astype(float)}

    def dims_of(self, prep) -> dict:
        return {"input_dim": int(prep["x"].shape[1])}

    def init_params(self, dims, cfg, rng):
        d = dims["input_dim"]
        self.input_dim = d
        ah = cfg.width(self.spec.attn_hidden)
        h = cfg.width(self.spec.hidden)
        self.attn = MLPBlock("attn", [d, ah, d], rng, self.params)
        widths = [d] + [h] * (self.spec.mlp_layers - 1) + [1]
        self.mlp = MLPBlock("mlp", widths, rng, self.params)

    def _forward(self, x):
        e, attn_cache = self.attn.forward(x)
        a = softmax_rows(e)
        # scale by the feature count so uniform attention acts as identity
        z = x * a * x.shape[1]
        out, mlp_cache = self.mlp.forward(z)
        return out[:, 0], (x, a, attn_cache, mlp_cache)

    def loss_and_grads(self, prep, idx):
        x = prep["x"][idx]
        y = prep["labels"][idx]
        logits, (x_, a, attn_cache, mlp_cache) = self._forward(x)
        loss, dlogits = self._bce(logits, y)
        grads: dict[str, np.ndarray] = {}
        dz = self.mlp.backward(dlogits[:, None], mlp_cache, grads)
        da = dz * x_ * x_.shape[1]
        de = softmax_rows_backward(a, da)
        self.attn.backward(de, attn_cache, grads)
        return loss, grads

    def unit_logits(self, prep):
        x = prep["x"]
        if x.shape[1] != self.input_dim:
            raise ShapeMismatchError(f"expected {self.input_dim} features, got {x.shape[1]}")
        logits, _ = self._forward(x)
        return logits


# ---------------------------------------------------------------------------
# Multimodal MLP towers (five modalities, concatenated then merged)


class MultimodalMLP(NeuralModel):
    spec: MultimodalMLPSpec

    def prepare(self, ds):
        _require_kind(ds, KIND_DENSE, "multimodal mlp")
        if not isinstance(ds.payload, tuple):
            raise ShapeMismatchError("multimodal mlp expects a tuple of modality matrices")
        mats = tuple(np.asarray(m, dtype=float) for m in ds.payload)
        return {"x": mats, "labels": ds.labels.astype(float)}

    def dims_of(self, prep) -> dict:
        return {"input_dims": [int(m.shape[1]) for m in prep["x"]]}

    def init_params(self, dims, cfg, rng):
        self.input_dims = list(dims["input_dims"])
        tower_w = [cfg.width(w) for w in self.spec.tower_layers]
        merge_w = [cfg.width(w) for w in self.spec.merge_layers]
        self.towers = [
            MLPBlock(f"tower{i}", [d] + tower_w, rng, self.params, final_relu=True)
            for i, d in enumerate(self.input_dims)
        ]
        self.merge = MLPBlock(
            "merge", [tower_w[-1] * len(self.towers)] + merge_w + [1], rng, self.params
        )

    def _forward(self, mats):
        outs, caches = [], []
        for tower, m in zip(self.towers, mats):
            o, c = tower.forward(m)
            outs.append(o)
            caches.append(c)
        concat = np.concatenate(outs, axis=1)
        logits, merge_cache = self.merge.forward(concat)
        return logits[:, 0], (caches, merge_cache, [o.shape[1] for o in outs])

    def loss_and_grads(self, prep, idx):
        mats = [m[idx] for m in prep["x"]]
        y = prep["labels"][idx]
        logits, (caches, merge_cache, widths) = self._forward(mats)
        loss, dlogits = self._bce(logits, y)
        grads: dict[str, np.ndarray] = {}
        dconcat = self.merge.backward(dlogits[:, None], merge_cache, grads)
        offset = 0
        for tower, cache, w in zip(self.towers, caches, widths):
            tower.backward(dconcat[:, offset : offset + w], cache, grads)
            offset += w
        return loss, grads

    def unit_logits(self, prep):
        mats = prep["x"]
        dims = [m.shape[1] for m in mats]
        if dims != self.input_dims:
            raise ShapeMismatchError(f"expected modality dims {self.input_dims}, got {dims}")
        logits, _ = self._forward(mats)
        return logits


# ---------------------------------------------------------------------------
# LSTM sequence classifier (token sequences, index 0 = pad/OOV)


class LSTMClassifier(NeuralModel):
    spec: LSTMSpec

    def prepare(self, ds):
        _require_kind(ds, KIND_TOKEN_SEQ, "lstm")
        ids, lengths = ds.payload
        return {
            "ids": np.asarray(ids, dtype=np.int64),
            "lengths": np.asarray(lengths, dtype=np.int64),
            "labels": ds.labels.astype(float),
            "vocab": int(ds.meta["vocab_size"]),
        }

    def dims_of(self, prep) -> dict:
        return {"vocab": int(prep["vocab"])}

    def init_params(self, dims, cfg, rng):
        self.vocab = dims["vocab"]
        d = cfg.width(self.spec.embed)
        h = cfg.width(self.spec.hidden)
        self.embed_dim, self.hidden = d, h
        self.params["embed"] = (rng.random((self.vocab, d)) - 0.5) / d
        for layer in range(self.spec.layers):
            in_dim = d if layer == 0 else h
            self.params[f"lstm{layer}.Wx"] = glorot(rng, in_dim, 4 * h, (in_dim, 4 * h))
            self.params[f"lstm{layer}.Wh"] = glorot(rng, h, 4 * h, (h, 4 * h))
            b = np.zeros(4 * h)
            b[h : 2 * h] = 1.0  # forget-gate bias
            self.params[f"lstm{layer}.b"] = b
        self.params["out.W"] = glorot(rng, h, 1)
        self.params["out.b"] = np.zeros(1)

    def unit_sort_key(self, prep):
        return prep["lengths"]

    def _forward(self, ids, lengths):
        b, t_max = ids.shape
        t_max = max(int(lengths.max()), 1)
        ids = ids[:, :t_max]
        h_dim = self.hidden
        emb = self.params["embed"][ids]  # (B, T, D)
        mask = (np.arange(t_max)[None, :] < lengths[:, None]).astype(float)  # (B, T)
        inputs = emb
        layer_caches = []
        for layer in range(self.spec.layers):
            wx = self.params[f"lstm{layer}.Wx"]
            wh = self.params[f"lstm{layer}.Wh"]
            bias = self.params[f"lstm{layer}.b"]
            h_prev = np.zeros((b, h_dim))
            c_prev = np.zeros((b, h_dim))
            hs = np.zeros((b, t_max, h_dim))
            steps = []
            for t in range(t_max):
                x_t = inputs[:, t, :]
                z = x_t @ wx + h_prev @ wh + bias
                i = sigmoid(z[:, :h_dim])
                f = sigmoid(z[:, h_dim : 2 * h_dim])
                g = np.tanh(z[:, 2 * h_dim : 3 * h_dim])
                o = sigmoid(z[:, 3 * h_dim :])
                c_new = f * c_prev + i * g
                tanh_c = np.tanh(c_new)
                h_new = o * tanh_c
                m = mask[:, t : t + 1]
                h_t = m * h_new + (1 - m) * h_prev
                c_t = m * c_new + (1 - m) * c_prev
                steps.append((x_t, h_prev, c_prev, i, f, g, o, tanh_c, m))
                hs[:, t, :] = h_t
                h_prev, c_prev = h_t, c_t
            layer_caches.append((inputs, steps))
            inputs = hs
        final_h = h_prev  # masked carry leaves the last true state in place
        logits = (final_h @ self.params["out.W"] + self.params["out.b"])[:, 0]
        return logits, (ids, mask, layer_caches, final_h)

    def loss_and_grads(self, prep, idx):
        ids = prep["ids"][idx]
        lengths = prep["lengths"][idx]
        y = prep["labels"][idx]
        logits, cache = self._forward(ids, lengths)
        loss, dlogits = self._bce(logits, y)
        grads = self._backward(dlogits, cache)
        return loss, grads

    def _backward(self, dlogits, cache):
        ids, mask, layer_caches, final_h = cache
        b, t_max = ids.shape
        h_dim = self.hidden
        grads: dict[str, np.ndarray] = {
            "out.W": final_h.T @ dlogits[:, None],
            "out.b": np.array([dlogits.sum()]),
        }
        # gradient arriving at each layer's output sequence
        dh_seq = np.zeros((b, t_max, h_dim))
        dh_seq[:, -1, :] += dlogits[:, None] * self.params["out.W"][:, 0][None, :]
        # Correction: the final state is h at the last step index (carry), which
        # equals hs[:, -1, :]; routing the output gradient there is exact.
        for layer in reversed(range(self.spec.layers)):
            inputs, steps = layer_caches[layer]
            wx = self.params[f"lstm{layer}.Wx"]
            wh = self.params[f"lstm{layer}.Wh"]
            d_wx = np.zeros_like(wx)
            d_wh = np.zeros_like(wh)
            d_b = np.zeros(4 * h_dim)
            d_inputs = np.zeros_like(inputs)
            dh_next = np.zeros((b, h_dim))
            dc_next = np.zeros((b, h_dim))
            for t in reversed(range(t_max)):
                x_t, h_prev, c_prev, i, f, g, o, tanh_c, m = steps[t]
                dh_t = dh_seq[:, t, :] + dh_next
                dc_t = dc_next
                dh_new = dh_t * m
                dh_prev_carry = dh_t * (1 - m)
                dc_new = dc_t * m
                dc_prev_carry = dc_t * (1 - m)
                do = dh_new * tanh_c
                dc_new = dc_new + dh_new * o * (1 - tanh_c**2)
                di = dc_new * g
                dg = dc_new * i
                df = dc_new * c_prev
                dc_prev = dc_new * f + dc_prev_carry
                dz = np.concatenate(
                    [di * i * (1 - i), df * f * (1 - f), dg * (1 - g**2), do * o * (1 - o)],
                    axis=1,
                )
                d_wx += x_t.T @ dz
                d_wh += h_prev.T @ dz
                d_b += dz.sum(axis=0)
                d_inputs[:, t, :] = dz @ wx.T
                dh_next = dz @ wh.T + dh_prev_carry
                dc_next = dc_prev
            grads[f"lstm{layer}.Wx"] = d_wx
            grads[f"lstm{layer}.Wh"] = d_wh
            grads[f"lstm{layer}.b"] = d_b
            if layer > 0:
                dh_seq = d_inputs
            else:
                d_embed = np.zeros_like(self.params["embed"])
                np.add.at(d_embed, ids, d_inputs)
                grads["embed"] = d_embed
        return grads

    def unit_logits(self, prep):
        ids, lengths = prep["ids"], prep["lengths"]
        out = np.empty(len(ids))
        # chunked to bound the BPTT cache footprint
        for start in range(0, len(ids), 256):
            sl = slice(start, start + 256)
            logits, _ = self._forward(ids[sl], lengths[sl])
            out[sl] = logits
        return out


# ---------------------------------------------------------------------------
# CNN over one-hot opcode images (gather convolution, masked global max-pool)


class CNNClassifier(NeuralModel):
    spec: CNNSpec

    def prepare(self, ds):
        _require_kind(ds, KIND_ONEHOT_SEQ, "cnn")
        ids, lengths = ds.payload
        return {
            "ids": np.asarray(ids, dtype=np.int64),
            "lengths": np.asarray(lengths, dtype=np.int64),
            "labels": ds.labels.astype(float),
            "vocab": int(ds.meta["vocab_size"]),
        }

    def dims_of(self, prep) -> dict:
        return {"vocab": int(prep["vocab"])}

    def init_params(self, dims, cfg, rng):
        v = dims["vocab"]
        k = self.spec.kernel_width
        f = cfg.width(self.spec.filters)
        fc = cfg.width(self.spec.fc)
        self.vocab, self.k, self.filters = v, k, f
        w = glorot(rng, v * k, f, (v + 1, k, f))
        w[v] = 0.0  # pad row contributes nothing and stays frozen
        self.params["conv.W"] = w
        self.params["conv.b"] = np.zeros(f)
        self.fc = MLPBlock("fc", [f, fc, 1], rng, self.params)

    def unit_sort_key(self, prep):
        return prep["lengths"]

    def _forward(self, ids, lengths):
        k = self.k
        b = ids.shape[0]
        t_max = max(int(lengths.max()), k)
        if ids.shape[1] < t_max:
            pad = np.full((b, t_max - ids.shape[1]), self.vocab, dtype=np.int64)
            ids = np.concatenate([ids, pad], axis=1)
        else:
            ids = ids[:, :t_max].copy()
        ids[np.arange(t_max)[None, :] >= lengths[:, None]] = self.vocab
        tc = t_max - k + 1
        w = self.params["conv.W"]
        pre = np.zeros((b, tc, self.filters))
        for i in range(k):
            pre += w[ids[:, i : i + tc], i, :]
        pre += self.params["conv.b"]
        act = np.maximum(pre, 0.0)
        valid = np.maximum(lengths - k + 1, 1)
        window_mask = np.arange(tc)[None, :] < valid[:, None]
        masked = np.where(window_mask[:, :, None], act, -np.inf)
        arg = np.argmax(masked, axis=1)  # (B, F); valid >= 1 keeps this finite
        pooled = np.take_along_axis(masked, arg[:, None, :], axis=1)[:, 0, :]
        logits, fc_cache = self.fc.forward(pooled)
        return logits[:, 0], (ids, pre, arg, tc, fc_cache)

    def loss_and_grads(self, prep, idx):
        ids = prep["ids"][idx]
        lengths = prep["lengths"][idx]
        y = prep["labels"][idx]
        logits, cache = self._forward(ids, lengths)
        loss, dlogits = self._bce(logits, y)
        grads = self._backward(dlogits, cache)
        return loss, grads

    def _backward(self, dlogits, cache):
        ids, pre, arg, tc, fc_cache = cache
        b = ids.shape[0]
        grads: dict[str, np.ndarray] = {}
        dpooled = self.fc.backward(dlogits[:, None], fc_cache, grads)
        dact = np.zeros_like(pre)
        b_idx = np.repeat(np.arange(b), self.filters)
        f_idx = np.tile(np.arange(self.filters), b)
        dact[b_idx, arg.reshape(-1), f_idx] = dpooled.reshape(-1)
        dpre = dact * (pre > 0)
        d_w = np.zeros_like(self.params["conv.W"])
        for i in range(self.k):
            np.add.at(d_w[:, i, :], ids[:, i : i + tc].reshape(-1), dpre.reshape(-1, self.filters))
        d_w[self.vocab] = 0.0  # pad row frozen
        grads["conv.W"] = d_w
        grads["conv.b"] = dpre.sum(axis=(0, 1))
        return grads

    def unit_logits(self, prep):
        ids, lengths = prep["ids"], prep["lengths"]
        out = np.empty(len(ids))
        for start in range(0, len(ids), 512):
            sl = slice(start, start + 512)
            logits, _ = self._forward(ids[sl], lengths[sl])
            out[sl] = logits
        return out

    def parameter_count(self) -> int:
        # the frozen all-zero pad row of conv.W is not a learnable parameter
        return super().parameter_count() - self.k * self.filters


# ---------------------------------------------------------------------------
# Autoencoder + classifier (two-phase training handled in train.py)


class AEClassifier(NeuralModel):
    spec: AEClassifierSpec

    def prepare(self, ds):
        _require_kind(ds, KIND_DENSE, "ae classifier")
        return {"x": np.asarray(ds.payload, dtype=float), "labels": ds.labels.astype(float)}

    def dims_of(self, prep) -> dict:
        return {"input_dim": int(prep["x"].shape[1])}

    def init_params(self, dims, cfg, rng):
        d = dims["input_dim"]
        self.input_dim = d
        h = cfg.width(self.spec.hidden)
        self.enc = MLPBlock("enc", [d] + [h] * self.spec.enc_layers, rng, self.params)
        self.dec = MLPBlock("dec", [h] * self.spec.dec_layers + [d], rng, self.params)
        clf_widths = [h] * self.spec.clf_layers + [1]
        self.clf = MLPBlock("clf", clf_widths, rng, self.params)

    def _recon(self, x):
        latent, enc_cache = self.enc.forward(x)
        xhat, dec_cache = self.dec.forward(latent)
        return latent, xhat, enc_cache, dec_cache

    def recon_loss(self, x) -> float:
        """Per-sample sum of squared errors, averaged over the batch."""
        _, xhat, _, _ = self._recon(x)
        return float(np.mean(np.sum((xhat - x) ** 2, axis=1)))

    def ae_loss_and_grads(self, prep, idx):
        x = prep["x"][idx]
        latent, xhat, enc_cache, dec_cache = self._recon(x)
        n = x.shape[0]
        loss = float(np.mean(np.sum((xhat - x) ** 2, axis=1)))
        dxhat = 2.0 * (xhat - x) / n
        grads: dict[str, np.ndarray] = {}
        dlatent = self.dec.backward(dxhat, dec_cache, grads)
        self.enc.backward(dlatent, enc_cache, grads)
        for key in list(self.params):
            if key.startswith("clf.") and key not in grads:
                grads[key] = np.zeros_like(self.params[key])
        return loss, grads

    def loss_and_grads(self, prep, idx):
        """Joint phase: lambda2*CE + lambda1*hinge(recon - target) + lambda3*recon."""
        x = prep["x"][idx]
        y = prep["labels"][idx]
        s = self.spec
        latent, xhat, enc_cache, dec_cache = self._recon(x)
        logits, clf_cache = self.clf.forward(latent)
        ce, dlogits = self._bce(logits[:, 0], y)
        n = x.shape[0]
        rec = float(np.mean(np.sum((xhat - x) ** 2, axis=1)))
        hinge_active = 1.0 if rec > s.recon_target else 0.0
        loss = s.lambda2 * ce + s.lambda1 * max(0.0, rec - s.recon_target) + s.lambda3 * rec
        rec_coeff = s.lambda1 * hinge_active + s.lambda3
        grads: dict[str, np.ndarray] = {}
        dlatent_clf = self.clf.backward(s.lambda2 * dlogits[:, None], clf_cache, grads)
        dxhat = rec_coeff * 2.0 * (xhat - x) / n
        dlatent_dec = self.dec.backward(dxhat, dec_cache, grads)
        self.enc.backward(dlatent_clf + dlatent_dec, enc_cache, grads)
        return loss, grads

    def unit_logits(self, prep):
        x = prep["x"]
        if x.shape[1] != self.input_dim:
            raise ShapeMismatchError(f"expected {self.input_dim} features, got {x.shape[1]}")
        latent, _ = self.enc.forward(x)
        logits, _ = self.clf.forward(latent)
        return logits[:, 0]


# ---------------------------------------------------------------------------
# GNN over rooted subgraphs (mean-aggregation message passing, mean readout)


class GNNClassifier(NeuralModel):
    spec: GNNSpec

    def prepare(self, ds):
        _require_kind(ds, KIND_GRAPH_BATCH, "gnn")
        feats: list[np.ndarray] = []
        src: list[np.ndarray] = []
        dst: list[np.ndarray] = []
        graph_id: list[np.ndarray] = []
        sub_app: list[int] = []  # app row per subgraph
        offset = 0
        n_sub = 0
        for app_idx, subgraphs in enumerate(ds.payload):
            for sg in subgraphs:
                n = sg.n_nodes
                if n == 0:
                    continue
                feats.append(np.asarray(sg.node_features, dtype=float))
                if len(sg.edges):
                    e = np.asarray(sg.edges, dtype=np.int64)
                    src.append(e[:, 0] + offset)
                    dst.append(e[:, 1] + offset)
                graph_id.append(np.full(n, n_sub, dtype=np.int64))
                sub_app.append(app_idx)
                offset += n
                n_sub += 1
        if n_sub:
            x = np.concatenate(feats, axis=0)
            gid = np.concatenate(graph_id)
            if src:
                s = np.concatenate(src)
                d = np.concatenate(dst)
                # undirected message passing: duplicate each edge
                src_all = np.concatenate([s, d])
                dst_all = np.concatenate([d, s])
            else:
                src_all = np.zeros(0, dtype=np.int64)
                dst_all = np.zeros(0, dtype=np.int64)
        else:
            x = np.zeros((0, int(ds.meta.get("feature_dim", 1))))
            gid = np.zeros(0, dtype=np.int64)
            src_all = np.zeros(0, dtype=np.int64)
            dst_all = np.zeros(0, dtype=np.int64)
        deg = np.zeros(x.shape[0])
        if len(dst_all):
            np.add.at(deg, dst_all, 1.0)
        n_nodes = np.zeros(n_sub)
        if n_sub:
            np.add.at(n_nodes, gid, 1.0)
        sub_labels = ds.labels[sub_app] if n_sub else np.zeros(0, dtype=np.int64)
        return {
            "x": x,
            "gid": gid,
            "src": src_all,
            "dst": dst_all,
            "deg": deg,
            "n_nodes": n_nodes,
            "sub_app": np.asarray(sub_app, dtype=np.int64),
            "n_apps": ds.n_rows,
            "n_sub": n_sub,
            "labels": sub_labels.astype(float),
            "app_labels": ds.labels.astype(float),
        }

    def dims_of(self, prep) -> dict:
        return {"input_dim": int(prep["x"].shape[1])}

    def init_params(self, dims, cfg, rng):
        self.input_dim = dims["input_dim"]
        h = cfg.width(self.spec.hidden)
        fc_h = cfg.width(self.spec.fc_hidden)
        self.hidden = h
        dims = [self.input_dim] + [h] * self.spec.layers
        for layer in range(self.spec.layers):
            self.params[f"gnn{layer}.Ws"] = glorot(rng, dims[layer], dims[layer + 1])
            self.params[f"gnn{layer}.Wn"] = glorot(rng, dims[layer], dims[layer + 1])
            self.params[f"gnn{layer}.b"] = np.zeros(dims[layer + 1])
        fc_widths = [h] + [fc_h] * (self.spec.fc_layers - 1) + [1]
        self.fc = MLPBlock("fc", fc_widths, rng, self.params)

    def _sub_select(self, prep, idx):
        """Restrict a prepared batch to the given subgraph indices."""
        sub_mask = np.zeros(prep["n_sub"], dtype=bool)
        sub_mask[idx] = True
        node_mask = sub_mask[prep["gid"]]
        node_map = -np.ones(len(prep["gid"]), dtype=np.int64)
        node_map[node_mask] = np.arange(int(node_mask.sum()))
        sub_map = -np.ones(prep["n_sub"], dtype=np.int64)
        sub_map[idx] = np.arange(len(idx))
        edge_mask = node_mask[prep["src"]] if len(prep["src"]) else np.zeros(0, dtype=bool)
        src = node_map[prep["src"][edge_mask]] if len(prep["src"]) else prep["src"]
        dst = node_map[prep["dst"][edge_mask]] if len(prep["dst"]) else prep["dst"]
        x = prep["x"][node_mask]
        deg = np.zeros(x.shape[0])
        if len(dst):
            np.add.at(deg, dst, 1.0)
        return {
            "x": x,
            "gid": sub_map[prep["gid"][node_mask]],
            "src": src,
            "dst": dst,
            "deg": deg,
            "n_nodes": prep["n_nodes"][idx],
            "n_sub": len(idx),
            "labels": prep["labels"][idx],
        }

    def _forward(self, batch):
        x = batch["x"]
        src, dst, deg = batch["src"], batch["dst"], batch["deg"]
        safe_deg = np.maximum(deg, 1.0)
        h = x
        caches = []
        for layer in range(self.spec.layers):
            agg = np.zeros_like(h)
            if len(src):
                np.add.at(agg, dst, h[src])
            agg = agg / safe_deg[:, None]
            pre = (
                h @ self.params[f"gnn{layer}.Ws"]
                + agg @ self.params[f"gnn{layer}.Wn"]
                + self.params[f"gnn{layer}.b"]
            )
            caches.append((h, agg, pre))
            h = np.maximum(pre, 0.0)
        n_sub = batch["n_sub"]
        readout = np.zeros((n_sub, h.shape[1]))
        if h.shape[0]:
            np.add.at(readout, batch["gid"], h)
        readout = readout / np.maximum(batch["n_nodes"], 1.0)[:, None]
        logits, fc_cache = self.fc.forward(readout)
        return logits[:, 0], (caches, h, readout, fc_cache)

    def loss_and_grads(self, prep, idx):
        batch = self._sub_select(prep, np.asarray(idx))
        y = batch["labels"]
        logits, (caches, h_final, readout, fc_cache) = self._forward(batch)
        loss, dlogits = self._bce(logits, y)
        grads: dict[str, np.ndarray] = {}
        dreadout = self.fc.backward(dlogits[:, None], fc_cache, grads)
        dh = dreadout[batch["gid"]] / np.maximum(batch["n_nodes"], 1.0)[batch["gid"], None]
        src, dst = batch["src"], batch["dst"]
        safe_deg = np.maximum(batch["deg"], 1.0)
        for layer in reversed(range(self.spec.layers)):
            h_in, agg, pre = caches[layer]
            dpre = dh * (pre > 0)
            grads[f"gnn{layer}.Ws"] = h_in.T @ dpre
            grads[f"gnn{layer}.Wn"] = agg.T @ dpre
            grads[f"gnn{layer}.b"] = dpre.sum(axis=0)
            dh = dpre @ self.params[f"gnn{layer}.Ws"].T
            dagg = dpre @ self.params[f"gnn{layer}.Wn"].T
            dagg = dagg / safe_deg[:, None]
            if len(src):
                np.add.at(dh, src, dagg[dst])
        return loss, grads

    def unit_logits(self, prep):
        if prep["n_sub"] == 0:
            return np.zeros(0)
        logits, _ = self._forward(prep)
        return logits

    def app_labels(self, prep) -> np.ndarray:
        return prep["app_labels"]

    def scores_from_prep(self, prep) -> np.ndarray:
        scores = np.zeros(prep["n_apps"])
        if prep["n_sub"]:
            logits, _ = self._forward(prep)
            np.maximum.at(scores, prep["sub_app"], sigmoid(logits))
        return scores

    def app_scores(self, ds: EncodedDataset) -> np.ndarray:
        return self.scores_from_prep(self.prepare(ds))
