import numpy as np
import pytest

from bdris import harness
from bdris.harness import ConfigError, make_config
from bdris.pattern_builder import UnsupportedOrderError


def small_mse(**kw):
    base = dict(M=(8,), group_size=(1, 2), tile_size=(2,), trials=20,
                snr_db=(0.0, 10.0), seed=3)
    base.update(kw)
    return make_config(scenario="mse_sweep", **base)


def test_defaults_and_precedence():
    cfg = make_config(scenario="mimo_rate")
    assert cfg.M == (8, 16, 32) and cfg.trials == 200
    assert cfg.power_dl == pytest.approx(cfg.K * cfg.P_u)
    assert cfg.noise == pytest.approx(1e-13) and cfg.kappa == 1.0
    large = make_config(scenario="mimo_rate", paper_scale=True)
    assert max(large.M) == 128
    both = make_config({"M": [16]}, scenario="mimo_rate", paper_scale=True, trials=7, seed=None)
    assert both.M == (16,) and both.trials == 7 and both.seed == 0
    assert make_config(scenario="se-tradeoff").scenario == "se_tradeoff"


@pytest.mark.parametrize("bad", [dict(trials=0), dict(N=0), dict(Ns=3), dict(P_u=-1.0),
                                 dict(bases=["qr"]), dict(csi=["noisy"]), dict(system="x"),
                                 dict(T=[0]), dict(M=[7], group_size=[2]), dict(trials=1.5),
                                 dict(d1=0.0), dict(group_size=[]), dict(workers=0)])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        make_config(bad, scenario="mimo_rate")


def test_unknown_keys_and_scenario():
    with pytest.raises(ConfigError):
        make_config({"bogus": 1})
    with pytest.raises(ConfigError):
        make_config(scenario="nope")


def test_load_toml(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('scenario = "mse_sweep"\nM = [16]\ngroup_size = [2]\ntile_size = 2\n'
                 'snr_db = [5.0]\ntrials = 4\n')
    cfg = harness.load_config(p, trials=2)
    assert cfg.M == (16,) and cfg.tile_size == (2,) and cfg.trials == 2
    p.write_text("M = [8\n")
    with pytest.raises(ConfigError):
        harness.load_config(p)
    p.write_text("[grid]\nM = [8]\n")
    with pytest.raises(ConfigError):
        harness.load_config(p)


def test_grid_skips_inconsistent_points():
    cfg = make_config(scenario="mimo_rate", M=(8,), group_size=(1, 4), tile_size=(1, 4))
    assert harness.grid_points(cfg) == [(8, 1, 8, 1, 1), (8, 1, 8, 1, 4), (8, 1, 8, 4, 1)]
    ms = make_config(scenario="mumiso_sumrate", ML=(16, 24), sectors=(2, 4), K=4)
    assert {(p[0], p[1]) for p in harness.grid_points(ms)} == {(16, 2), (16, 4), (24, 2), (24, 4)}


def test_csv_format():
    t = harness.Table(("a", "b", "c", "d"), [(1, 0.1234567891234, "x", True)])
    assert harness.format_csv(t) == "a,b,c,d\n1,0.123456789,x,1\n"


def test_mse_sweep_rows_and_theory():
    tab = harness.run_mse_sweep(small_mse())
    assert tab.header[:2] == ("snr_db", "base_kind")
    assert len(tab.rows) == 2 * 3 * 2
    for r in tab.where(base_kind="dft"):
        assert r["mse_theory"] == pytest.approx(
            r["N"] * r["group_size"] * 1e-13 / r["P_u"], rel=1e-9)
        assert r["T1"] == r["K"] * r["group_size"] ** 2 * (8 // r["group_size"] // 2)
    dft = tab.where(base_kind="dft")
    had = tab.where(base_kind="hadamard")
    for a, b in zip(dft, had):
        assert a["normalized_mse_empirical"] == pytest.approx(b["normalized_mse_empirical"],
                                                              rel=1e-9)
    for a, r in zip(dft, tab.where(base_kind="random")):
        if a["group_size"] > 1:
            assert r["normalized_mse_theory"] > a["normalized_mse_theory"]


def test_mse_grows_with_group_size_at_fixed_snr():
    tab = harness.run_mse_sweep(small_mse(group_size=(1, 2, 4), bases=("dft",), trials=200))
    for snr in (0.0, 10.0):
        vals = [r["normalized_mse_empirical"] for r in
                sorted(tab.where(snr_db=snr), key=lambda r: r["group_size"])]
        assert vals[0] < vals[1] < vals[2]


def test_hadamard_order_error_propagates():
    cfg = small_mse(M=(12,), group_size=(3,), tile_size=(1,), bases=("hadamard",))
    with pytest.raises(UnsupportedOrderError):
        harness.run_mse_sweep(cfg)


def test_deterministic_and_worker_independent():
    cfg = small_mse(trials=6)
    a = harness.format_csv(harness.run(cfg))
    b = harness.format_csv(harness.run(cfg))
    c = harness.format_csv(harness.run(make_config(scenario="mse_sweep", **{
        **{k: getattr(cfg, k) for k in ("M", "group_size", "tile_size", "trials", "snr_db",
                                        "seed")}, "workers": 2})))
    assert a == b == c
    d = harness.format_csv(harness.run(small_mse(trials=6, seed=4)))
    assert d != a


def test_mimo_rate_pairs():
    cfg = make_config(scenario="mimo_rate", M=(8,), group_size=(1, 2), tile_size=(1,), trials=3)
    tab = harness.run_mimo_rate(cfg)
    assert len(tab.rows) == 4
    for mb in (1, 2):
        p = tab.where(group_size=mb, csi="perfect")[0]["mean_rate"]
        e = tab.where(group_size=mb, csi="estimated")[0]["mean_rate"]
        assert p > e > 0
    only = harness.run_mimo_rate(make_config(scenario="mimo_rate", M=(8,), group_size=(1,),
                                             tile_size=(1,), trials=3, csi=("perfect",)))
    assert only.column("csi") == ["perfect"]
    assert only.rows[0][-1] == tab.where(group_size=1, csi="perfect")[0]["mean_rate"]


def test_mumiso_rows():
    cfg = make_config(scenario="mumiso_sumrate", ML=(8,), sectors=(2,), group_size=(1,),
                      tile_size=(1,), trials=1)
    tab = harness.run_mumiso_sumrate(cfg)
    assert [r["csi"] for r in tab.where()] == ["perfect", "estimated"]
    r = tab.where(csi="perfect")[0]
    assert (r["ML"], r["L"], r["M"], r["T1"]) == (8, 2, 4, 16)


def test_se_tradeoff_prefactor_and_flags():
    cfg = make_config(scenario="se_tradeoff", M=(16,), group_size=(2,), tile_size=(1, 2),
                      T=(32, 64, 600), trials=10)
    tab = harness.run_se_tradeoff(cfg)
    for r in tab.where():
        if r["T"] <= r["T1"]:
            assert r["se_mean"] == 0.0 and r["feasible"] is False
        else:
            assert r["feasible"] is True
            assert r["se_mean"] == pytest.approx((1 - r["T1"] / r["T"]) * r["rate_mean"])
    for r in tab.where(scheme="optimized"):
        rnd = tab.where(scheme="random", tile_size=r["tile_size"], T=r["T"])[0]
        assert r["se_mean"] >= rnd["se_mean"]
    base = harness.random_bdris_baseline(cfg)
    assert set(base.column("scheme")) == {"random"}
    assert base.rows == [r for r in tab.rows if r[1] == "random"]


def test_se_tradeoff_mumiso_system():
    cfg = make_config(scenario="se_tradeoff", system="mumiso", ML=(8,), sectors=(2,),
                      group_size=(1,), tile_size=(1, 2), K=2, N=2, Ns=2, T=(600,), trials=1)
    tab = harness.run_se_tradeoff(cfg)
    assert set(tab.column("scheme")) == {"optimized"}
    assert set(tab.column("L")) == {2}


def test_write_csv(tmp_path):
    t = harness.Table(("x",), [(1.5,)])
    harness.write_csv(t, tmp_path / "o.csv")
    assert (tmp_path / "o.csv").read_text() == "x\n1.5\n"
    with pytest.raises(OSError):
        harness.write_csv(t, tmp_path / "missing" / "o.csv")
