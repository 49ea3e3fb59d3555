import numpy as np
import pytest

from rcpolar.construction import bec_bit_channels
from rcpolar.sim import (
    HARQ_COLUMNS,
    SWEEP_COLUMNS,
    ConfigError,
    Link,
    SimConfig,
    SweepPoint,
    harq_csv,
    load_config,
    parse_grid,
    puncture_order,
    run_harq_sweep,
    run_sweep,
    sweep_csv,
)

SMALL = dict(n=7, k=64, p=5, snr_db=(1.0, 3.0), min_errors=20, max_frames=2000, chunk=100)


def test_parse_grid():
    assert parse_grid("0:2:0.5") == (0.0, 0.5, 1.0, 1.5, 2.0)
    assert parse_grid("1, 2.5,4") == (1.0, 2.5, 4.0)
    with pytest.raises(ValueError):
        parse_grid("0:1:0")


def test_tx_len():
    assert SimConfig(n=10, k=352, rate=11 / 12).tx_len == 384
    assert SimConfig(n=10, k=352, L=700).tx_len == 700
    assert SimConfig(n=10, k=352).tx_len == 1024


@pytest.mark.parametrize("kw,key", [
    (dict(max_frames=0), "max_frames"),
    (dict(snr_db=()), "snr_db"),
    (dict(p=11), "p"),
    (dict(k=2000), "k"),
    (dict(modulation=8), "modulation"),
    (dict(channel="bec", modulation=16), "modulation"),
    (dict(crc_len=24, k=24), "crc_len"),
    (dict(decoder="bp"), "decoder"),
])
def test_validation(kw, key):
    with pytest.raises(ConfigError) as ei:
        SimConfig(**kw)
    assert ei.value.key == key


def test_config_file_errors_carry_line(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[code]\nn = 8\nk = 100\n\n[stop]\nmax_frames = 0\n")
    with pytest.raises(ConfigError, match=r"c\.ini:6: max_frames"):
        load_config(path)
    path.write_text("[code]\nn = 8\nbogus = 1\n")
    with pytest.raises(ConfigError, match=r":3: unknown key"):
        load_config(path)
    path.write_text("[code]\nn = eight\n")
    with pytest.raises(ConfigError, match=r":2:"):
        load_config(path)
    path.write_text("[nowhere]\nx = 1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        load_config(path)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.ini")


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[code]\nn = 8\nk = 100\n[rate_match]\nL = 200\n[channel]\nkind = awgn\nsnr_db = 0:1:0.5\n")
    cfg = load_config(path, ["run.seed=7", "decoder.type=scl"])
    assert (cfg.n, cfg.k, cfg.L, cfg.seed, cfg.decoder) == (8, 100, 200, 7, "scl")
    assert cfg.snr_db == (0.0, 0.5, 1.0)
    with pytest.raises(ConfigError):
        load_config(path, ["seed=7"])


def test_digest_ignores_workers():
    a = SimConfig(**SMALL)
    assert a.digest() == a.with_(workers=8).digest() != a.with_(seed=1).digest()


def test_puncture_order_sources(tmp_path):
    assert puncture_order(SimConfig(n=6, k=20, p=2, order="natural")) == (0, 1, 2, 3)
    golden = puncture_order(SimConfig(n=10, k=352, p=5))
    assert golden[:4] == (0, 16, 8, 24)
    path = tmp_path / "o.txt"
    path.write_text("base_n=2\n3\n1\n0\n2\n")
    assert puncture_order(SimConfig(n=6, k=20, p=2, order=str(path))) == (3, 1, 0, 2)
    with pytest.raises(ConfigError):
        puncture_order(SimConfig(n=6, k=20, p=3, order=str(path)))


@pytest.mark.parametrize("M", [2, 4, 16, 64])
def test_noiseless_sweep(M):
    cfg = SimConfig(n=8, k=100, L=230, modulation=M, noiseless=True, max_frames=200, chunk=100,
                    snr_db=(0.0,))
    (pt,) = run_sweep(cfg)
    assert pt.frames == 200 and pt.frame_errors == 0 and pt.bit_errors == 0


def test_stopping_rule():
    cfg = SimConfig(**{**SMALL, "snr_db": (-2.0,)})
    (pt,) = run_sweep(cfg)
    assert pt.frame_errors >= 20 and pt.frames % 100 == 0 and pt.frames < 2000


def test_fer_falls_with_snr():
    a, b = run_sweep(SimConfig(**{**SMALL, "min_errors": 50}))
    assert b.fer < a.fer


def test_sweep_deterministic_and_thread_independent():
    cfg = SimConfig(**SMALL, seed=3)
    serial = sweep_csv(run_sweep(cfg), cfg)
    assert serial == sweep_csv(run_sweep(cfg), cfg)
    assert serial == sweep_csv(run_sweep(cfg, workers=4), cfg.with_(workers=4))
    other = sweep_csv(run_sweep(cfg.with_(seed=4)), cfg.with_(seed=4))
    assert other != serial


def test_sweep_csv_format():
    cfg = SimConfig(**SMALL)
    lines = sweep_csv(run_sweep(cfg), cfg).splitlines()
    assert lines[0].startswith("# rcpolar") and "# schema=sweep-v1" in lines
    assert any(ln.startswith("# config_sha256=") for ln in lines)
    header = lines.index(SWEEP_COLUMNS)
    assert len(lines) == header + 3


def test_scl_with_crc_and_bec_channel():
    cfg = SimConfig(n=7, k=64, crc_len=8, decoder="scl", list_size=4, channel="bec", snr_db=(0.2,),
                    max_frames=300, chunk=100)
    (pt,) = run_sweep(cfg)
    assert pt.info_bits == pt.frames * 56
    assert pt.fer < 0.05


def test_fading_channel_runs():
    cfg = SimConfig(n=7, k=40, channel="fading", modulation=16, snr_db=(12.0,), max_frames=200, chunk=100)
    (pt,) = run_sweep(cfg)
    assert pt.frames == 200


def test_se_coverage_on_synthetic_errors():
    # Bernoulli frame errors with a known rate; frames in error carry a random number of bit errors
    rng = np.random.default_rng(0)
    p, frames, k = 0.05, 2000, 10
    hit_f = hit_b = 0
    for _ in range(200):
        err = rng.random(frames) < p
        bits = np.where(err, rng.integers(1, k + 1, frames), 0)
        pt = SweepPoint(0.0, frames, int(err.sum()), int(bits.sum()), frames * k, int((bits**2).sum()))
        hit_f += abs(pt.fer - p) <= 2 * pt.fer_se
        hit_b += abs(pt.ber - p * (k + 1) / 2 / k) <= 2 * pt.ber_se
    assert abs(hit_f / 200 - 0.95) <= 0.03
    assert abs(hit_b / 200 - 0.95) <= 0.03


def test_harq_noiseless_high_snr_limit():
    cfg = SimConfig(n=8, k=88, L=96, modulation=16, noiseless=True, sessions=64, chunk=32, snr_db=(0.0,))
    for scheme in ("cc", "ir"):
        (pt,) = run_harq_sweep(cfg, scheme=scheme)
        assert pt.counts.t_bar == 1.0 and pt.counts.residual_bler == 0.0
        assert pt.throughput == pytest.approx(88 / 96 * 4)


def test_harq_ir_not_worse_than_cc_at_one_point():
    cfg = SimConfig(n=8, k=88, L=96, modulation=16, sessions=256, chunk=64, snr_db=(8.0,))
    cc, = run_harq_sweep(cfg, scheme="cc")
    ir, = run_harq_sweep(cfg, scheme="ir")
    assert ir.throughput >= cc.throughput


def test_harq_csv_deterministic():
    cfg = SimConfig(n=7, k=40, L=48, modulation=4, sessions=100, chunk=25, snr_db=(2.0, 4.0), seed=5)
    a = harq_csv(run_harq_sweep(cfg), cfg, 4)
    b = harq_csv(run_harq_sweep(cfg, workers=3), cfg.with_(workers=3), 4)
    assert a == b
    lines = a.splitlines()
    assert HARQ_COLUMNS in lines and "# t=4" in lines
    assert lines[-1].split(",")[1] == "ir"


def test_harq_rejects_unknown_scheme():
    with pytest.raises(ConfigError):
        run_harq_sweep(SimConfig(**SMALL), scheme="arq")


def test_link_uses_first_transmission_puncture():
    link = Link(SimConfig(n=8, k=100, L=160, design_snr_db=2.0), 2.0)
    soft = np.zeros(256)
    soft[link.rm.positions] = 1.0
    # no information bit sits on a dead channel of the punctured code
    cap = bec_bit_channels(8, 0.5, tuple(np.flatnonzero(soft == 0))).capacity
    assert np.all(cap[list(link.spec.info_set)] > 0)
