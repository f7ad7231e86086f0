"""Exact and hit-and-run samplers.

Reproducibility protocol: rows are generated in fixed blocks of
``CHUNK_ROWS``; block ``c`` draws from ``seed.generator(c)``. Output is
therefore identical for any worker count and a smaller ``m`` is always a
prefix of a larger one at the same seed. Directions and frames use blocks of
``FRAME_CHUNK``, hit-and-run uses blocks of ``CHAIN_BLOCK`` chains.
"""
from __future__ import annotations

import csv
import io
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from .logconcave1d import named
from .model import (
    Ball,
    Body,
    ChordError,
    Cube,
    Ellipsoid,
    Gaussian,
    HPolytope,
    Product1D,
    ProductBody,
    RandomSeed,
    Simplex,
    Subspace,
    UniformOn,
)

CHUNK_ROWS = 16_384
FRAME_CHUNK = 1_024
CHAIN_BLOCK = 4_096
PILOT_ROWS = 262_144
PILOT_STREAM_OFFSET = 0x5EED

BATCH_MAGIC = b"CLTBATCH"
BATCH_VERSION = 1


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """An m×n block of samples (one per row) plus how it was produced."""

    data: np.ndarray
    seed: RandomSeed
    sampler_id: str
    burn_in: int = 0
    thinning: int = 1
    provenance: tuple = field(default=())

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError(f"batch needs at least one row, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("batch contains non-finite entries")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "seed", RandomSeed.coerce(self.seed))

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def with_data(self, data, note: str | None = None) -> "SampleBatch":
        prov = self.provenance + ((note,) if note else ())
        return replace(self, data=data, provenance=prov)


@dataclass(frozen=True)
class HitAndRunConfig:
    """Chain settings; ``None`` fields take the defaults ``10 n²``, ``n`` and the body's interior point."""

    burn_in: int | None = None
    thinning: int | None = None
    start: np.ndarray | None = None
    chains: int = 1

    def resolved(self, n: int, body: Body) -> "HitAndRunConfig":
        burn_in = 10 * n * n if self.burn_in is None else int(self.burn_in)
        thinning = n if self.thinning is None else int(self.thinning)
        if burn_in < 0 or thinning < 1 or self.chains < 1:
            raise ValueError("need burn_in >= 0, thinning >= 1, chains >= 1")
        start = body.interior_point() if self.start is None else np.asarray(self.start, dtype=float)
        return HitAndRunConfig(burn_in, thinning, start, int(self.chains))


# ---------------------------------------------------------------------------
# block machinery


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("CLT_LAB_WORKERS", "1"))
    return max(1, int(workers))


def _blocks(total: int, size: int):
    return [(c, c * size, min(total, (c + 1) * size)) for c in range(math.ceil(total / size))]


def _fill(out: np.ndarray, size: int, seed: RandomSeed, draw: Callable, workers: int | None):
    def work(block):
        c, lo, hi = block
        out[lo:hi] = draw(seed.generator(c), hi - lo)

    blocks = _blocks(out.shape[0], size)
    w = _workers(workers)
    if w == 1 or len(blocks) == 1:
        for b in blocks:
            work(b)
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            list(pool.map(work, blocks))
    return out


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)."""
    return (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) * 2.0**-53


# ---------------------------------------------------------------------------
# per-law row generators: draw(rng, rows) -> rows×n


def _draw_cube(n, half_side=math.sqrt(3.0)):
    return lambda rng, rows: rng.uniform(-half_side, half_side, size=(rows, n))


def _draw_ball(n, radius=None):
    radius = math.sqrt(n + 2.0) if radius is None else radius

    def draw(rng, rows):
        g = rng.standard_normal((rows, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = radius * rng.random(rows) ** (1.0 / n)
        return g * r[:, None]

    return draw


def _draw_simplex(n):
    def draw(rng, rows):
        e = rng.standard_exponential((rows, n + 1))
        return e[:, :n] / e.sum(axis=1, keepdims=True)

    return draw


def _draw_gaussian(n, v=1.0):
    s = math.sqrt(v)
    return lambda rng, rows: s * rng.standard_normal((rows, n))


def _draw_product_1d(labels):
    laws = [named(lab) for lab in labels]

    def draw(rng, rows):
        return np.column_stack([law.draw(rng, rows) for law in laws])

    return draw


def _draw_body(body: Body, seed: RandomSeed) -> Callable:
    if isinstance(body, Cube):
        return _draw_cube(body.dim, body.half_side)
    if isinstance(body, Ball):
        return _draw_ball(body.dim, body.radius)
    if isinstance(body, Simplex):
        raw = _draw_simplex(body.dim)
        if not body.standardize:
            return raw
        wmap = _simplex_whitening(body.dim, seed)
        return lambda rng, rows: wmap(raw(rng, rows))
    if isinstance(body, Ellipsoid):
        unit = _draw_ball(body.dim, 1.0)
        root = body.root
        return lambda rng, rows: unit(rng, rows) @ root
    if isinstance(body, ProductBody):
        parts = [_draw_body(p, seed.substream(i + 1)) for i, p in enumerate(body.parts)]
        return lambda rng, rows: np.hstack([d(rng, rows) for d in parts])
    if isinstance(body, HPolytope):
        def draw(rng, rows):
            cfg = HitAndRunConfig(chains=rows)
            return _hit_and_run_block(body, rows, rng, cfg.resolved(body.dim, body))

        return draw
    raise TypeError(f"no sampler for {type(body).__name__}")


def _simplex_whitening(n: int, seed: RandomSeed):
    from .isotropy import empirical_moments, whitening_map

    pilot_seed = seed.substream(PILOT_STREAM_OFFSET)
    pilot = _fill(np.empty((PILOT_ROWS, n)), CHUNK_ROWS, pilot_seed, _draw_simplex(n), None)
    return whitening_map(empirical_moments(pilot))


def row_generator(density, seed: RandomSeed) -> tuple[Callable, int, str]:
    """Return ``(draw, n, sampler_id)`` for a density description."""
    if isinstance(density, Body):
        density = UniformOn(density)
    if isinstance(density, UniformOn):
        body = density.body
        sid = "hit_and_run" if isinstance(body, HPolytope) and not isinstance(body, Simplex) else f"uniform_{body.kind}"
        return _draw_body(body, seed), body.dim, sid
    if isinstance(density, Gaussian):
        return _draw_gaussian(density.dim, density.variance), density.dim, "gaussian"
    if isinstance(density, Product1D):
        return _draw_product_1d(density.labels), density.dim, "product_1d"
    raise TypeError(f"unsupported density {density!r}")


def sample_density(density, m: int, seed, workers: int | None = None) -> SampleBatch:
    seed = RandomSeed.coerce(seed)
    draw, n, sid = row_generator(density, seed)
    data = _fill(np.empty((m, n)), CHUNK_ROWS, seed, draw, workers)
    return SampleBatch(data, seed, sid)


def iter_chunks(density, m: int, seed, workers: int | None = None) -> Iterator[np.ndarray]:
    """Stream the rows of ``sample_density(density, m, seed)`` block by block."""
    seed = RandomSeed.coerce(seed)
    draw, _, _ = row_generator(density, seed)
    yield from iter_draw(draw, m, seed, workers)


def iter_draw(draw: Callable, m: int, seed: RandomSeed, workers: int | None = None) -> Iterator[np.ndarray]:
    """Yield ``draw(seed.generator(c), rows)`` for the row blocks of ``m``.

    With ``workers > 1`` up to ``workers`` blocks are generated concurrently;
    the yield order is always the block order.
    """
    blocks = _blocks(m, CHUNK_ROWS)
    w = _workers(workers)
    if w == 1:
        for c, lo, hi in blocks:
            yield draw(seed.generator(c), hi - lo)
        return
    with ThreadPoolExecutor(max_workers=w) as pool:
        for i in range(0, len(blocks), w):
            group = blocks[i:i + w]
            yield from pool.map(lambda b: draw(seed.generator(b[0]), b[2] - b[1]), group)


# ---------------------------------------------------------------------------
# exact samplers


def _check_counts(n, m):
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")


def sample_cube(n: int, m: int, seed, workers: int | None = None) -> SampleBatch:
    """i.i.d. uniform points of ``[-√3, √3]ⁿ``."""
    _check_counts(n, m)
    return sample_density(UniformOn(Cube(n)), m, seed, workers)


def sample_ball(n: int, m: int, seed, workers: int | None = None) -> SampleBatch:
    """i.i.d. uniform points of the ball of radius ``√(n+2)``: gaussian direction times ``R U^{1/n}``."""
    _check_counts(n, m)
    return sample_density(UniformOn(Ball(n)), m, seed, workers)


def sample_simplex(n: int, m: int, seed, standardize: bool = False, workers: int | None = None) -> SampleBatch:
    """Uniform points of the standard simplex by normalized exponential spacings.

    With ``standardize`` the draws are pushed through a whitening map
    estimated on an independent pilot sample of ``PILOT_ROWS`` rows.
    """
    _check_counts(n, m)
    batch = sample_density(UniformOn(Simplex(n, standardize)), m, seed, workers)
    return batch.with_data(batch.data, "standardized" if standardize else None)


def sample_gaussian(n: int, m: int, seed, v: float = 1.0, workers: int | None = None) -> SampleBatch:
    _check_counts(n, m)
    if v <= 0:
        raise ValueError("variance must be positive")
    return sample_density(Gaussian(n, v), m, seed, workers)


def sphere_draw(n: int, radius: float | None = None) -> Callable:
    r = math.sqrt(n) if radius is None else radius

    def draw(rng, rows):
        g = rng.standard_normal((rows, n))
        return r * g / np.linalg.norm(g, axis=1, keepdims=True)

    return draw


def sample_sphere(n: int, m: int, seed, radius: float | None = None, workers: int | None = None) -> SampleBatch:
    """Uniform points of the sphere of radius ``√n`` (or ``radius``)."""
    _check_counts(n, m)
    seed = RandomSeed.coerce(seed)
    data = _fill(np.empty((m, n)), CHUNK_ROWS, seed, sphere_draw(n, radius), workers)
    return SampleBatch(data, seed, "sphere")


# ---------------------------------------------------------------------------
# directions and frames


def _frame_blocks(n, count, seed, shape):
    seed = RandomSeed.coerce(seed)
    for c, lo, hi in _blocks(count, FRAME_CHUNK):
        yield seed.generator(c).standard_normal((hi - lo,) + shape)


def sample_directions(n: int, count: int, seed) -> np.ndarray:
    """``count`` independent σ_{n-1} directions as rows."""
    if n < 1:
        raise ValueError("n must be positive")
    g = np.concatenate(list(_frame_blocks(n, count, seed, (n,))))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_direction(n: int, seed) -> np.ndarray:
    return sample_directions(n, 1, seed)[0]


def orthonormalize(g: np.ndarray) -> np.ndarray:
    """Rows of ``g`` (..., k, n) → orthonormal rows via QR with a positive-diagonal triangular factor."""
    q, r = np.linalg.qr(np.swapaxes(g, -1, -2))
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    return np.swapaxes(q * signs[..., None, :], -1, -2)


def iter_frames(n: int, k: int, count: int, seed) -> Iterator[np.ndarray]:
    """σ_{n,k}-distributed frames in blocks, each of shape (block, k, n)."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    for g in _frame_blocks(n, count, seed, (k, n)):
        yield orthonormalize(g)


def sample_frames(n: int, k: int, count: int, seed) -> np.ndarray:
    return np.concatenate(list(iter_frames(n, k, count, seed)))


def sample_subspace(n: int, k: int, seed) -> Subspace:
    return Subspace(sample_frames(n, k, 1, seed)[0])


# ---------------------------------------------------------------------------
# hit-and-run


def _hit_and_run_block(body: Body, rows: int, rng: np.random.Generator, cfg: HitAndRunConfig) -> np.ndarray:
    chains = min(cfg.chains, rows)
    per_chain = math.ceil(rows / chains)
    x = np.tile(cfg.start, (chains, 1))
    n = body.dim
    kept = np.empty((per_chain, chains, n))

    def step(x):
        # the chord is a set of points, so the direction need not be normalized
        d = rng.standard_normal((chains, n))
        lo, hi = body._chord(x, d)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ChordError("unbounded chord during hit-and-run")
        t = lo + (hi - lo) * open_uniform(rng, chains)
        return x + t[:, None] * d

    for _ in range(cfg.burn_in):
        x = step(x)
    for j in range(per_chain):
        for _ in range(cfg.thinning):
            x = step(x)
        kept[j] = x
    return kept.reshape(-1, n)[:rows]


def sample_hit_and_run(body: Body, m: int, seed, cfg: HitAndRunConfig | None = None,
                       workers: int | None = None) -> SampleBatch:
    """Hit-and-run chains on ``body``.

    Each step draws a uniform direction and moves to a uniform point of the
    chord through the current state. After ``burn_in`` steps every
    ``thinning``-th state is kept. With ``chains > 1`` independent chains
    run side by side (blocks of ``CHAIN_BLOCK`` chains share one stream) and
    rows are interleaved step-major.
    """
    seed = RandomSeed.coerce(seed)
    n = body.dim
    cfg = (cfg or HitAndRunConfig()).resolved(n, body)
    start = np.asarray(cfg.start, dtype=float)
    if start.shape != (n,) or not body.contains(start):
        raise ChordError("hit-and-run start point is not inside the body")
    probe = np.eye(n)
    lo, hi = body._chord(np.tile(start, (n, 1)), probe)
    if np.any(lo >= 0) or np.any(hi <= 0):
        raise ChordError("hit-and-run start point lies on the boundary")

    chains = min(cfg.chains, m)
    per_chain = math.ceil(m / chains)
    blocks = _blocks(chains, CHAIN_BLOCK)

    def run(block):
        c, lo_, hi_ = block
        sub = replace(cfg, chains=hi_ - lo_)
        return _hit_and_run_block(body, (hi_ - lo_) * per_chain, seed.generator(c), sub).reshape(per_chain, hi_ - lo_, n)

    w = _workers(workers)
    if w == 1 or len(blocks) == 1:
        parts = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            parts = list(pool.map(run, blocks))
    data = np.concatenate(parts, axis=1).reshape(-1, n)[:m]
    return SampleBatch(data, seed, "hit_and_run", cfg.burn_in, cfg.thinning)


# ---------------------------------------------------------------------------
# persistence


def write_batch(batch: SampleBatch, path) -> None:
    """Binary layout (all little-endian):

    ``CLTBATCH`` | u32 version | u64 n | u64 m | u64 seed | u64 stream_id |
    u64 burn_in | u64 thinning | u32 len | sampler_id (utf-8) | m·n f64, row-major
    """
    sid = batch.sampler_id.encode()
    header = BATCH_MAGIC + struct.pack(
        "<IQQQQQQI", BATCH_VERSION, batch.n, batch.m, batch.seed.seed, batch.seed.stream_id,
        batch.burn_in, batch.thinning, len(sid),
    )
    with open(path, "wb") as fh:
        fh.write(header + sid)
        fh.write(np.ascontiguousarray(batch.data, dtype="<f8").tobytes())


def read_batch(path) -> SampleBatch:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != BATCH_MAGIC:
        raise ValueError(f"{path}: not a sample batch file")
    fmt = "<IQQQQQQI"
    version, n, m, seed, stream, burn, thin, slen = struct.unpack_from(fmt, raw, 8)
    if version != BATCH_VERSION:
        raise ValueError(f"{path}: unsupported batch version {version}")
    off = 8 + struct.calcsize(fmt)
    sid = raw[off:off + slen].decode()
    off += slen
    expected = off + 8 * n * m
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated batch ({len(raw)} bytes, expected {expected})")
    data = np.frombuffer(raw, dtype="<f8", offset=off).reshape(m, n).astype(float)
    return SampleBatch(data, RandomSeed(seed, stream), sid, burn, thin)


def batch_to_csv(batch: SampleBatch) -> str:
    buf = io.StringIO()
    buf.write(
        f"# sampler_id={batch.sampler_id} seed={batch.seed.seed} stream_id={batch.seed.stream_id} "
        f"burn_in={batch.burn_in} thinning={batch.thinning}\n"
    )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{i}" for i in range(batch.n)])
    for row in batch.data:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def batch_from_csv(text: str) -> SampleBatch:
    lines = text.splitlines()
    meta = dict(item.split("=", 1) for item in lines[0].lstrip("# ").split())
    rows = list(csv.reader(lines[2:]))
    data = np.array([[float(v) for v in r] for r in rows], dtype=float)
    return SampleBatch(
        data, RandomSeed(int(meta["seed"]), int(meta["stream_id"])), meta["sampler_id"],
        int(meta["burn_in"]), int(meta["thinning"]),
    )
