"""Monte Carlo link simulation: BER/FER sweeps and HARQ throughput sweeps.

A frame goes through encode, rate matching, BICM mapping, the channel,
demapping, de-rate-matching and decoding. Frames are simulated in chunks of
fixed size; chunk ``c`` of SNR point ``i`` draws all of its randomness from
the stream ``(seed, i, c)``, and chunk results are merged strictly in chunk
order, so the output does not depend on the number of worker threads.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import __version__
from .bicm import assign_columns, deinterleave_llrs, interleave_to_symbols
from .channels import MODULATIONS, ChannelModel, bec_observe, demap_llr, modulate, rng_stream, transmit
from .construction import bec_bit_channels, ga_construct, select_info_set
from .decoders import DecodeResult, sc_decode, scl_decode
from .harq import SCHEMES, HarqCounts, HarqSession, combine, round_config, next_redundancy
from .polar_core import CodeSpec, encode, read_info_set, systematic_encode, systematic_info_from_input
from .puncturing import Criterion, PunctureOrder, ppa_for_rate, read_order
from .rate_match import RateMatchConfig, derate_match, select_bits


class ConfigError(ValueError):
    """Invalid simulation configuration; ``line`` points into the config file when known."""

    def __init__(self, msg: str, line: int | None = None, path=None, key: str | None = None):
        self.msg, self.line, self.path, self.key = msg, line, path, key
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + msg)


@dataclass(frozen=True)
class SimConfig:
    # code
    n: int = 10
    k: int = 512
    crc_len: int = 0
    info_set: str = "ga"  # "ga" or a path to an info-set file
    design_snr_db: float | None = None  # None: design at every SNR point
    systematic: bool = False
    # rate matching
    p: int = 5
    L: int | None = None  # None: derived from `rate`, or N
    rate: float | None = None
    order: str = "ppa"  # "ppa", "natural" or a path to a puncture-order file
    ppa_k: int | None = None  # None: k scaled to the base code
    ppa_design_snr_db: float = 3.5
    start_column: int = 0
    layout: str = "descending"
    # channel
    channel: str = "awgn"  # awgn | fading | bec; for bec the grid holds erasure probabilities
    modulation: int = 2
    snr_db: tuple[float, ...] = (0.0,)
    noiseless: bool = False
    # decoder
    decoder: str = "sc"  # sc | scl
    list_size: int = 8
    use_crc: bool = True
    # stopping rule
    min_errors: int = 100
    max_frames: int = 1_000_000
    chunk: int = 256
    # harq
    scheme: str = "ir"
    t: int = 4
    sessions: int = 1000
    # run
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        self.validate()

    def validate(self) -> None:
        def need(cond, msg, key):
            if not cond:
                raise ConfigError(msg, key=key)

        need(self.n >= 1, "n must be >= 1", "n")
        need(0 <= self.p <= self.n, "p must lie in [0, n] (q = n - p)", "p")
        need(1 <= self.k <= self.N, f"k must lie in [1, N={self.N}]", "k")
        need(0 <= self.crc_len < self.k, "crc_len must lie in [0, k)", "crc_len")
        need(len(self.snr_db) > 0, "SNR grid must be nonempty", "snr_db")
        need(self.modulation in MODULATIONS, f"modulation must be one of {MODULATIONS}", "modulation")
        need(self.channel in ("awgn", "fading", "bec"), "channel must be awgn, fading or bec", "channel")
        need(self.channel != "bec" or self.modulation == 2, "the bec channel requires modulation = 2", "modulation")
        need(self.decoder in ("sc", "scl"), "decoder must be sc or scl", "decoder")
        need(self.list_size >= 1, "list_size must be >= 1", "list_size")
        need(self.min_errors >= 1, "min_errors must be >= 1", "min_errors")
        need(self.max_frames >= 1, "max_frames must be >= 1", "max_frames")
        need(self.chunk >= 1, "chunk must be >= 1", "chunk")
        need(self.sessions >= 1, "sessions must be >= 1", "sessions")
        need(self.scheme in SCHEMES, f"scheme must be one of {SCHEMES}", "scheme")
        need(self.t >= 1, "t must be >= 1", "t")
        need(self.workers >= 1, "workers must be >= 1", "workers")
        need(self.layout in ("descending", "alternating"), "layout must be descending or alternating", "layout")
        need(self.L is None or self.L >= 1, "L must be >= 1", "L")
        need(self.rate is None or 0 < self.rate, "rate must be positive", "rate")
        need(0 <= self.start_column < (1 << self.p), "start_column must lie in [0, 2^p)", "start_column")
        need(self.tx_len >= 1, "transmission length must be >= 1", "L")

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def q(self) -> int:
        return self.n - self.p

    @property
    def tx_len(self) -> int:
        if self.L is not None:
            return self.L
        if self.rate is not None:
            return int(round(self.k / self.rate))
        return self.N

    @property
    def code_rate(self) -> float:
        return self.k / self.tx_len

    def digest(self) -> str:
        """Hash of every setting that affects results (thread count excluded)."""
        d = dataclasses.asdict(self)
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def with_(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)


# ---------------------------------------------------------------------------- config files

_SECTIONS = {
    "code": ("n", "k", "crc_len", "info_set", "design_snr_db", "systematic"),
    "rate_match": ("p", "L", "rate", "order", "ppa_k", "ppa_design_snr_db", "start_column", "layout"),
    "channel": ("channel", "modulation", "snr_db", "noiseless"),
    "decoder": ("decoder", "list_size", "use_crc"),
    "stop": ("min_errors", "max_frames", "chunk"),
    "harq": ("scheme", "t", "sessions"),
    "run": ("seed", "workers"),
}
_ALIASES = {("channel", "kind"): "channel", ("decoder", "type"): "decoder", ("channel", "snr"): "snr_db"}


def parse_grid(text: str) -> tuple[float, ...]:
    """``"0,1,2.5"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        a, b, s = (float(v) for v in text.split(":"))
        if s <= 0:
            raise ValueError("grid step must be positive")
        count = int(math.floor((b - a) / s + 1e-9)) + 1
        return tuple(round(a + i * s, 10) for i in range(count))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _convert(key: str, raw: str):
    f = {fld.name: fld for fld in dataclasses.fields(SimConfig)}[key]
    raw = raw.strip()
    if key == "snr_db":
        return parse_grid(raw)
    if raw.lower() in ("none", "") and "None" in str(f.type):
        return None
    if "bool" in str(f.type):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if "int" in str(f.type) and "float" not in str(f.type):
        try:
            return int(raw)
        except ValueError:
            v = float(raw)  # allows 1e6
            if not v.is_integer():
                raise ValueError(f"expected an integer, got {raw!r}") from None
            return int(v)
    if "float" in str(f.type):
        return float(raw)
    return raw


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip().lower()
        elif "=" in s and not s.startswith(("#", ";")) and section:
            lines[(section, s.split("=", 1)[0].strip().lower())] = i
    return lines


def apply_settings(base: dict, settings: Iterable[tuple[str, str, str]], path=None,
                   lines: dict | None = None) -> dict:
    """Fold ``(section, key, raw value)`` triples into a dict of SimConfig fields."""
    lines = lines or {}
    out = dict(base)
    for section, key, raw in settings:
        line = lines.get((section, key))
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", line, path)
        name = _ALIASES.get((section, key)) or {f.lower(): f for f in _SECTIONS[section]}.get(key)
        if name is None:
            raise ConfigError(f"unknown key {key!r} in [{section}]", line, path)
        try:
            out[name] = _convert(name, raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", line, path) from None
        if line:
            out.setdefault("_lines", {})[name] = line
    return out


def load_config(path=None, overrides: Iterable[str] = ()) -> SimConfig:
    """Read an INI-style config file, then apply ``section.key=value`` overrides."""
    fields: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from None
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            cp.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), path) from None
        triples = [(s.lower(), k.lower(), v) for s in cp.sections() for k, v in cp.items(s)]
        fields = apply_settings(fields, triples, path, _key_lines(text))
    triples = []
    for item in overrides:
        key, sep, val = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        triples.append((section.lower(), name.lower(), val))
    fields = apply_settings(fields, triples)
    lines = fields.pop("_lines", {})
    try:
        return SimConfig(**fields)
    except ConfigError as exc:
        raise ConfigError(exc.msg, lines.get(exc.key), path, exc.key) from None


# ---------------------------------------------------------------------------- link


@lru_cache(maxsize=16)
def _ppa_order(p: int, k: int, design_snr_db: float) -> PunctureOrder:
    return ppa_for_rate(p, k, Criterion.ga(design_snr_db))


def puncture_order(cfg: SimConfig) -> tuple[int, ...]:
    P = 1 << cfg.p
    if cfg.order == "natural":
        return tuple(range(P))
    if cfg.order == "ppa":
        if cfg.p == 0:
            return (0,)
        k = cfg.ppa_k if cfg.ppa_k is not None else max(1, min(P, round(cfg.k * P / cfg.N)))
        return _ppa_order(cfg.p, k, cfg.ppa_design_snr_db).order
    try:
        order = read_order(cfg.order)
    except OSError as exc:
        raise ConfigError(f"cannot read puncture order {cfg.order!r}: {exc.strerror}") from None
    if order.base_n != cfg.p:
        raise ConfigError(f"puncture order has base_n={order.base_n}, config has p={cfg.p}")
    return order.order


@dataclass
class Link:
    """Everything needed to simulate frames at one SNR point."""

    cfg: SimConfig
    point: float  # SNR in dB, or erasure probability on the BEC
    rm: RateMatchConfig = field(init=False)
    spec: CodeSpec = field(init=False)

    def __post_init__(self):
        cfg = self.cfg
        self.rm = RateMatchConfig(cfg.p, cfg.q, cfg.tx_len, puncture_order(cfg), cfg.start_column)
        self.spec = CodeSpec(cfg.n, self._info_set(), cfg.crc_len)

    def _info_set(self):
        cfg = self.cfg
        if cfg.info_set != "ga":
            try:
                info = read_info_set(cfg.info_set)
            except OSError as exc:
                raise ConfigError(f"cannot read info set {cfg.info_set!r}: {exc.strerror}") from None
            if len(info) != cfg.k:
                raise ConfigError(f"info set file holds {len(info)} indices, k = {cfg.k}")
            return info
        first = self.rm.with_(start_column=0)
        sent = np.zeros(cfg.N, dtype=bool)
        sent[first.positions] = True
        punct = np.flatnonzero(~sent)
        # on the BEC the design value is an erasure probability
        design = self.point if cfg.design_snr_db is None else cfg.design_snr_db
        if cfg.channel == "bec":
            return select_info_set(bec_bit_channels(cfg.n, design, punct), cfg.k)
        return select_info_set(ga_construct(cfg.n, design, punct), cfg.k)

    @cached_property
    def channel(self) -> ChannelModel:
        cfg = self.cfg
        if cfg.channel == "bec":
            return ChannelModel.bec(self.point)
        if cfg.noiseless:
            return ChannelModel(cfg.channel, cfg.modulation, 1e-4)
        return ChannelModel.from_snr_db(cfg.channel, self.point, cfg.modulation)

    def make_frames(self, B: int, rng: np.random.Generator):
        """``(info, codeword)`` for ``B`` random frames."""
        spec = self.spec
        payload = rng.integers(0, 2, size=(B, spec.payload_len), dtype=np.uint8)
        info = spec.attach_crc(payload)
        x = systematic_encode(info, spec) if self.cfg.systematic else encode(spec.embed(info), spec.n)
        return info, x

    def send(self, x, rm: RateMatchConfig, assignment, rng) -> np.ndarray:
        """Channel LLRs (transmission order) of one transmission of the codewords ``x``."""
        bits = select_bits(x, rm)
        if self.cfg.channel == "bec":
            if self.cfg.noiseless:
                return np.where(bits == 0, np.inf, -np.inf)
            return bec_observe(bits, self.point, rng)[1]
        sym_bits = interleave_to_symbols(bits, assignment)
        sym = modulate(sym_bits, self.cfg.modulation)
        if self.cfg.noiseless:
            r, a = sym, np.ones(sym.shape, dtype=complex)
        else:
            r, a = transmit(sym, self.channel, rng)
        return deinterleave_llrs(demap_llr(r, a, self.channel), assignment)

    def decode(self, soft) -> DecodeResult:
        if self.cfg.decoder == "scl":
            return scl_decode(soft, self.spec, self.cfg.list_size, self.cfg.use_crc)
        return sc_decode(soft, self.spec)

    def decoded_info(self, res: DecodeResult) -> np.ndarray:
        if self.cfg.systematic:
            return systematic_info_from_input(res.u, self.spec)
        return res.info


# ---------------------------------------------------------------------------- chunked execution


def _chunk_sizes(total: int, chunk: int) -> list[int]:
    return [min(chunk, total - s) for s in range(0, total, chunk)]


def _run_ordered(jobs: list[Callable], workers: int, stop: Callable) -> None:
    """Run ``jobs`` in waves of ``workers``; results are fed to ``stop`` in job order until it returns True."""
    if workers == 1:
        for job in jobs:
            if stop(job()):
                return
        return
    with ThreadPoolExecutor(max_workers=workers) as ex:
        for w in range(0, len(jobs), workers):
            futures = [ex.submit(job) for job in jobs[w:w + workers]]
            for fut in futures:
                if stop(fut.result()):
                    for f in futures:
                        f.cancel()
                    return


@dataclass
class SweepPoint:
    snr_db: float
    frames: int = 0
    frame_errors: int = 0
    bit_errors: int = 0
    info_bits: int = 0
    # sum over frames of (bit errors in the frame)^2, for the clustered standard error
    bit_errors_sq: int = 0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else float("nan")

    @property
    def fer_se(self) -> float:
        p = self.fer
        return math.sqrt(p * (1 - p) / self.frames) if self.frames else float("nan")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.info_bits if self.info_bits else float("nan")

    @property
    def ber_se(self) -> float:
        """Standard error of the BER treating frames (not bits) as independent samples."""
        if self.frames < 2:
            return float("nan")
        k = self.info_bits / self.frames
        mean = self.bit_errors / self.frames
        var = (self.bit_errors_sq / self.frames - mean**2) * self.frames / (self.frames - 1)
        return math.sqrt(max(var, 0.0) / self.frames) / k


def simulate_frames(link: Link, B: int, rng: np.random.Generator) -> SweepPoint:
    info, x = link.make_frames(B, rng)
    rm = link.rm
    assignment = assign_columns(rm.L, rm, link.cfg.modulation, link.cfg.layout)
    soft = derate_match(link.send(x, rm, assignment, rng), rm)
    got = link.decoded_info(link.decode(soft))
    errs = got != info
    if link.spec.crc_len:
        errs = errs[:, : link.spec.payload_len]
    per_frame = errs.sum(axis=1)
    return SweepPoint(link.point, B, int((per_frame > 0).sum()), int(per_frame.sum()), int(errs.size),
                      int((per_frame.astype(np.int64) ** 2).sum()))


def run_point(cfg: SimConfig, index: int, point: float, workers: int | None = None) -> SweepPoint:
    link = Link(cfg, point)
    acc = SweepPoint(point)
    sizes = _chunk_sizes(cfg.max_frames, cfg.chunk)
    jobs = [lambda c=c, b=b: simulate_frames(link, b, rng_stream(cfg.seed, index, c)) for c, b in enumerate(sizes)]

    def stop(res: SweepPoint) -> bool:
        acc.frames += res.frames
        acc.frame_errors += res.frame_errors
        acc.bit_errors += res.bit_errors
        acc.info_bits += res.info_bits
        acc.bit_errors_sq += res.bit_errors_sq
        return acc.frame_errors >= cfg.min_errors

    _run_ordered(jobs, workers or cfg.workers, stop)
    return acc


def run_sweep(cfg: SimConfig, workers: int | None = None) -> list[SweepPoint]:
    """BER/FER at every grid point, stopping at ``min_errors`` frame errors or ``max_frames`` frames."""
    return [run_point(cfg, i, s, workers) for i, s in enumerate(cfg.snr_db)]


# ---------------------------------------------------------------------------- HARQ


def simulate_sessions(link: Link, scheme: str, t: int, B: int, rng: np.random.Generator) -> HarqCounts:
    """Run ``B`` sessions in lock-step; the ACK compares the decoded info bits with the truth."""
    info, x = link.make_frames(B, rng)
    session = HarqSession(scheme, t, link.rm.with_(start_column=0), link.cfg.modulation, link.cfg.layout,
                          buffer=np.zeros((B, link.cfg.N)), success_round=np.zeros(B, dtype=np.int64))
    active = np.ones(B, dtype=bool)
    tx = np.zeros(B, dtype=np.int64)
    while not session.exhausted and active.any():
        cfg_r = round_config(session)
        _, asg = next_redundancy(session)
        llr = np.zeros((B, cfg_r.L))
        llr[active] = link.send(x[active], cfg_r, asg, rng)
        tx[active] += 1
        idx = np.flatnonzero(active)

        def ack(buf, idx=idx):
            ok = np.zeros(B, dtype=bool)
            res = link.decode(buf[idx])
            ok[idx] = np.all(link.decoded_info(res) == info[idx], axis=1)
            return ok

        session = combine(session, llr, ack)
        active = ~session.done
    return HarqCounts(B, int(tx.sum()), int(active.sum()))


@dataclass
class HarqPoint:
    snr_db: float
    scheme: str
    modulation: int
    rate: float
    counts: HarqCounts

    @property
    def throughput(self) -> float:
        return self.counts.throughput(self.rate, self.modulation)


def run_harq_point(cfg: SimConfig, index: int, point: float, scheme: str, t: int,
                   workers: int | None = None) -> HarqPoint:
    link = Link(cfg, point)
    acc = HarqCounts()
    sizes = _chunk_sizes(cfg.sessions, cfg.chunk)
    jobs = [lambda c=c, b=b: simulate_sessions(link, scheme, t, b, rng_stream(cfg.seed, index, c))
            for c, b in enumerate(sizes)]

    def stop(res: HarqCounts) -> bool:
        nonlocal acc
        acc += res
        return False

    _run_ordered(jobs, workers or cfg.workers, stop)
    return HarqPoint(point, scheme, cfg.modulation, cfg.code_rate, acc)


def run_harq_sweep(cfg: SimConfig, scheme: str | None = None, t: int | None = None,
                   workers: int | None = None) -> list[HarqPoint]:
    """Throughput, average transmissions and residual BLER at every grid point."""
    scheme = scheme or cfg.scheme
    t = t or cfg.t
    if scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}")
    return [run_harq_point(cfg, i, s, scheme, t, workers) for i, s in enumerate(cfg.snr_db)]


# ---------------------------------------------------------------------------- CSV

SWEEP_SCHEMA = "sweep-v1"
HARQ_SCHEMA = "harq-v1"
SWEEP_COLUMNS = "snr_db,frames,frame_errors,bit_errors,info_bits,fer,fer_se,ber,ber_se"
HARQ_COLUMNS = "snr_db,scheme,modulation,rate,throughput,avg_tx,residual_bler,frames"


def provenance(command: str, schema: str, cfg: SimConfig | None = None, extra: dict | None = None) -> list[str]:
    lines = [f"# rcpolar {__version__} {command}", f"# schema={schema}"]
    if cfg is not None:
        lines += [f"# seed={cfg.seed}", f"# config_sha256={cfg.digest()}"]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}={v}")
    return lines


def _g(v: float) -> str:
    return repr(float(v))


def sweep_csv(points: list[SweepPoint], cfg: SimConfig) -> str:
    rows = provenance("simulate", SWEEP_SCHEMA, cfg) + [SWEEP_COLUMNS]
    for p in points:
        rows.append(",".join([_g(p.snr_db), str(p.frames), str(p.frame_errors), str(p.bit_errors),
                              str(p.info_bits), _g(p.fer), _g(p.fer_se), _g(p.ber), _g(p.ber_se)]))
    return "\n".join(rows) + "\n"


def harq_csv(points: list[HarqPoint], cfg: SimConfig, t: int) -> str:
    rows = provenance("harq", HARQ_SCHEMA, cfg, {"t": t}) + [HARQ_COLUMNS]
    for p in points:
        c = p.counts
        rows.append(",".join([_g(p.snr_db), p.scheme, str(p.modulation), _g(p.rate), _g(p.throughput),
                              _g(c.t_bar), _g(c.residual_bler), str(c.sessions)]))
    return "\n".join(rows) + "\n"
