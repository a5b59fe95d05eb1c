"""Decoder query construction for prior-aware map detection.

Three point encoders decide how a prior point enters the query:

* ``A``: zero-padded coordinates used as both content and positional part,
  reference point projected from the positional part.
* ``B``: content adds a class embedding and a point-index embedding;
  positional part and reference point as in ``A``.
* ``C``: content as in ``B``; positional part is a learned prior embedding
  and the reference point is the prior point itself.

Query sets hold one O2O block and ``k`` O2M repetitions. ``SMP`` places
prior rows only in the O2O block, ``MMP`` also tiles them into every O2M
repetition.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .geometry import CLASS_ORDER, BevRange, MapClass, VectorMap, resample


class QueryError(ValueError):
    pass


class Encoder(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"


class Design(str, enum.Enum):
    SMP = "SMP"
    MMP = "MMP"


@dataclass(frozen=True)
class PriorQuery:
    element_id: str
    point_index: Optional[int] = None

    def to_json(self) -> dict:
        out = {"kind": "prior", "element_id": self.element_id}
        if self.point_index is not None:
            out["point_index"] = self.point_index
        return out


@dataclass(frozen=True)
class LearnedQuery:
    slot: Optional[int] = None

    def to_json(self) -> dict:
        return {"kind": "learned", "slot": self.slot}


Provenance = Union[PriorQuery, LearnedQuery]


def provenance_from_json(obj) -> Provenance:
    if not isinstance(obj, dict) or obj.get("kind") not in ("prior", "learned"):
        raise QueryError(f"invalid provenance {obj!r}")
    if obj["kind"] == "prior":
        if "element_id" not in obj:
            raise QueryError("prior provenance needs element_id")
        return PriorQuery(str(obj["element_id"]), obj.get("point_index"))
    return LearnedQuery(obj.get("slot"))


@dataclass(frozen=True)
class QueryConfig:
    n_o2o: int = 70
    k: int = 5
    n_points: int = 20

    @property
    def n_o2m(self) -> int:
        return self.k * self.n_o2o

    @property
    def n_slots(self) -> int:
        return self.n_o2o + self.n_o2m


class EmbeddingTables:
    """Seeded stand-ins for the learned embeddings of a trained decoder."""

    def __init__(self, d_model: int = 256, config: QueryConfig = QueryConfig(), seed: int = 0):
        if d_model < 2:
            raise QueryError("d_model must be at least 2")
        self.d_model = d_model
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        slots, v = config.n_slots, config.n_points
        self.learned_content = rng.standard_normal((slots, v, d_model))
        self.learned_pos = rng.standard_normal((slots, v, d_model))
        self.prior_class_embed = rng.standard_normal((len(CLASS_ORDER), d_model))
        self.prior_point_embed = rng.standard_normal((v, d_model))
        self.prior_pos_embed = rng.standard_normal(d_model)
        # linear layer init scale keeps projected logits O(1)
        self.ref_projection = rng.standard_normal((2, d_model)) / np.sqrt(d_model)
        for arr in (self.learned_content, self.learned_pos, self.prior_class_embed,
                    self.prior_point_embed, self.prior_pos_embed, self.ref_projection):
            arr.setflags(write=False)

    def class_embed(self, cls: MapClass) -> np.ndarray:
        return self.prior_class_embed[CLASS_ORDER.index(MapClass(cls))]


@dataclass(frozen=True, eq=False)
class PointQuery:
    content: np.ndarray
    positional: np.ndarray
    ref_point: np.ndarray
    provenance: Provenance


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def zero_pad(xy_norm, d_model: int) -> np.ndarray:
    xy_norm = np.asarray(xy_norm, dtype=float)
    out = np.zeros(xy_norm.shape[:-1] + (d_model,))
    out[..., :2] = xy_norm
    return out


def _project(tables: EmbeddingTables, pos: np.ndarray) -> np.ndarray:
    return _sigmoid(pos @ tables.ref_projection.T)


def _check_inside(xy, bev_range: BevRange):
    if not np.all(bev_range.contains(xy)):
        raise QueryError("prior point outside BEV range; clip the prior first")


def encode_point(encoder: Encoder, prior_point, slot: int, tables: EmbeddingTables,
                 bev_range: BevRange, point_index: int = 0) -> PointQuery:
    """Encode one point query.

    ``prior_point`` is ``None`` for a learned slot, else a tuple
    ``(x, y, z, cls, point_index[, element_id])``.
    """
    encoder = Encoder(encoder)
    if prior_point is None:
        pos = tables.learned_pos[slot, point_index]
        return PointQuery(
            tables.learned_content[slot, point_index].copy(), pos.copy(),
            _project(tables, pos), LearnedQuery(slot),
        )
    x, y, _z, cls, v = prior_point[:5]
    element_id = prior_point[5] if len(prior_point) > 5 else ""
    _check_inside(np.array([x, y]), bev_range)
    xy = bev_range.normalize(np.array([x, y]))
    padded = zero_pad(xy, tables.d_model)
    if encoder is Encoder.A:
        content = padded
    else:
        content = padded + tables.class_embed(cls) + tables.prior_point_embed[v]
    if encoder is Encoder.C:
        pos = tables.prior_pos_embed.copy()
        ref = xy.copy()
    else:
        pos = padded.copy()
        ref = _project(tables, pos)
    return PointQuery(content, pos, ref, PriorQuery(element_id, int(v)))


class QuerySet:
    """Dense query block.

    Arrays are indexed ``[row, point]``; O2O rows come first, followed by the
    ``k`` O2M repetitions of ``n_o2o`` rows each.
    """

    def __init__(self, content, positional, ref, row_provenance, design, encoder, config):
        self.content = content
        self.positional = positional
        self.ref = ref
        self.row_provenance = row_provenance
        self.design = Design(design)
        self.encoder = Encoder(encoder)
        self.config = config

    @property
    def o2o(self) -> slice:
        return slice(0, self.config.n_o2o)

    @property
    def o2m(self) -> slice:
        return slice(self.config.n_o2o, self.config.n_slots)

    @property
    def n_o2o_rows(self) -> int:
        return self.config.n_o2o

    @property
    def n_o2m_rows(self) -> int:
        return self.config.n_o2m

    def __len__(self):
        return self.content.shape[0] * self.content.shape[1]

    def row_location(self, row: int) -> tuple[str, int, Optional[int]]:
        """(block, row inside block, repetition) of a global row index."""
        n = self.config.n_o2o
        if row < n:
            return "o2o", row, None
        return "o2m", row - n, (row - n) // n

    def prior_rows(self) -> list[int]:
        return [i for i, p in enumerate(self.row_provenance) if isinstance(p, PriorQuery)]

    def point_query(self, row: int, v: int) -> PointQuery:
        prov = self.row_provenance[row]
        if isinstance(prov, PriorQuery):
            prov = PriorQuery(prov.element_id, v)
        return PointQuery(self.content[row, v], self.positional[row, v], self.ref[row, v], prov)

    def export_lines(self) -> str:
        """One JSON line per point query."""
        out = []
        for row in range(self.content.shape[0]):
            block, brow, rep = self.row_location(row)
            for v in range(self.content.shape[1]):
                q = self.point_query(row, v)
                out.append(json.dumps({
                    "block": block, "row": brow, "rep": rep, "v": v,
                    "provenance": q.provenance.to_json(),
                    "ref": [float(c) for c in q.ref_point],
                }, separators=(",", ":")))
        return "".join(line + "\n" for line in out)

    def embedding_array(self) -> np.ndarray:
        """Concatenated content and positional parts, shape (rows, V, 2 * d_model)."""
        return np.concatenate([self.content, self.positional], axis=-1)

    def export_embeddings(self, path) -> None:
        self.embedding_array().astype("<f8").tofile(path)


def _prior_rows(prior: VectorMap, tables: EmbeddingTables, encoder: Encoder,
                bev_range: BevRange, n_points: int):
    content, pos, ref, prov = [], [], [], []
    d = tables.d_model
    for e in prior.elements:
        pts = e.points if len(e.points) == n_points else resample(e, n_points).points
        _check_inside(pts, bev_range)
        xy = bev_range.normalize(pts)
        padded = zero_pad(xy, d)
        if encoder is Encoder.A:
            c = padded
        else:
            c = padded + tables.class_embed(e.cls)[None, :] + tables.prior_point_embed
        if encoder is Encoder.C:
            p = np.broadcast_to(tables.prior_pos_embed, (n_points, d)).copy()
            r = xy
        else:
            p = padded.copy()
            r = _project(tables, p)
        content.append(c)
        pos.append(p)
        ref.append(r)
        prov.append(PriorQuery(e.id))
    return content, pos, ref, prov


def build_query_set(prior: VectorMap, design: Design, encoder: Encoder,
                    tables: EmbeddingTables, config: Optional[QueryConfig] = None,
                    bev_range: Optional[BevRange] = None) -> QuerySet:
    design, encoder = Design(design), Encoder(encoder)
    config = config or tables.config
    bev_range = bev_range or prior.bev_range
    if config.n_slots > tables.config.n_slots or config.n_points != tables.config.n_points:
        raise QueryError("embedding tables too small for the query configuration")
    n_prior = len(prior)
    if n_prior > config.n_o2o:
        raise QueryError("prior exceeds query budget")

    content = tables.learned_content[: config.n_slots].copy()
    pos = tables.learned_pos[: config.n_slots].copy()
    ref = _project(tables, pos)
    provenance: list[Provenance] = [LearnedQuery(s) for s in range(config.n_slots)]

    if n_prior:
        pc, pp, pr, pv = _prior_rows(prior, tables, encoder, bev_range, config.n_points)
        starts = [0]
        if design is Design.MMP:
            starts += [config.n_o2o * (1 + r) for r in range(config.k)]
        for start in starts:
            for i in range(n_prior):
                row = start + i
                content[row], pos[row], ref[row] = pc[i], pp[i], pr[i]
                provenance[row] = pv[i]
    for arr in (content, pos, ref):
        arr.setflags(write=False)
    return QuerySet(content, pos, ref, provenance, design, encoder, config)
