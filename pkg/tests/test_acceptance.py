"""Acceptance suite: one test per release criterion, in order.

Each test prints a single ``criterion N: PASS/FAIL (...)`` line straight
to the terminal (bypassing pytest's capture) so a full run produces a
compact scoreboard; the asserts behind each line enforce the same
conditions. The comparative and robustness checks train real models and
dominate the suite's runtime; their budgets are asserted explicitly.
"""

import csv
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from defm import cli
from defm.autodiff import (
    Tensor, add, concat, layer_norm, matmul, mean, multiply, relu, scale,
    slice_, softmax_rows, square, subtract, sum_all, tanh, transpose,
)
from defm.baselines import fit_ar, forecast_ar, forecast_hes, forecast_ma
from defm.embedding import SeriesMatrix, build_delay_embedding, consistency_pairs, full_hankel_grid
from defm.forecaster import DefmForecaster
from defm.io import read_json, read_series_csv
from defm.lorenz import LorenzConfig, add_noise, initial_state, integrate_lorenz, sample_cases
from defm.metrics import pcc, rmse
from defm.model import DefmModel, ModelConfig
from defm.training import loss_determined, loss_future_consistency

# Benchmark regimes. The ring at coupling 6.0 carries a traveling chaotic
# wave, which makes neighbouring oscillators informative about the target
# and short windows learnable; the comparative sweep additionally redraws
# rho every 2 time units so that single columns underdetermine the future
# and cross-time structure matters; the long-term check runs at rho 350
# with moderate coupling, where one training window keeps predictive power
# over 300 steps yet accuracy still falls off as the span grows.
ACCURACY_COUPLING = "6.0"
ACCURACY_SAMPLE_SEED = 1
COMPARISON_SWITCH_PERIOD = "2.0"
COMPARISON_NOISE = "0"
COMPARISON_SEED = "15"
LONG_TERM_COUPLING = "3.0"
LONG_TERM_RHO = "350.0"
LONG_TERM_TARGET = "1"


def _report(capfd, num: int, ok: bool, detail: str) -> None:
    # lift pytest's fd-level capture so the scoreboard line reaches the
    # terminal (and any tee) even when the test passes
    with capfd.disabled():
        print("criterion %d: %s (%s)" % (num, "PASS" if ok else "FAIL", detail),
              flush=True)


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def plain_series(outdir):
    path = outdir / "series.csv"
    assert cli.main(["generate", "--out", str(path), "--seed", "42",
                     "--coupling", ACCURACY_COUPLING, "--duration", "120"]) == 0
    return path


@pytest.fixture(scope="module")
def switching_series(outdir):
    path = outdir / "switching.csv"
    assert cli.main(["generate", "--out", str(path), "--seed", "42",
                     "--coupling", ACCURACY_COUPLING, "--duration", "120",
                     "--time-varying",
                     "--switch-period", COMPARISON_SWITCH_PERIOD]) == 0
    return path


# ------------------------------------------------------- 1: gradients

def _numeric_grad(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = f(x)
        flat[i] = keep - eps
        lo = f(x)
        flat[i] = keep
        gflat[i] = (hi - lo) / (2.0 * eps)
    return g


def _max_rel_err(got: np.ndarray, want: np.ndarray) -> float:
    return float((np.abs(got - want) / np.maximum(1.0, np.abs(want))).max())


def test_c01_gradients_match_finite_differences():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0

    def head(out: Tensor) -> Tensor:
        w = np.random.default_rng(7).standard_normal(out.shape)
        return sum_all(multiply(out, Tensor(w)))

    primitive_cases = [
        (lambda a, b: matmul(a, b), [(4, 3), (3, 5)]),
        (lambda a, b: add(a, b), [(3, 4), (3, 4)]),
        (lambda a, b: add(a, b), [(5, 4), (4,)]),
        (lambda a, b: subtract(a, b), [(3, 4), (3, 4)]),
        (lambda a, b: multiply(a, b), [(3, 4), (3, 4)]),
        (lambda a: scale(a, -2.5), [(3, 4)]),
        (lambda a: transpose(a), [(3, 4)]),
        (lambda a, b: concat([a, b], axis=0), [(2, 4), (3, 4)]),
        (lambda a, b: concat([a, b], axis=1), [(3, 2), (3, 4)]),
        (lambda a: slice_(a, (slice(1, 3), slice(0, 2))), [(4, 4)]),
        (lambda a: softmax_rows(a), [(4, 5)]),
        (lambda a: tanh(a), [(4, 5)]),
        (lambda a: relu(a), [(4, 5)]),
        (lambda a, g, b: layer_norm(a, g, b), [(4, 5), (5,), (5,)]),
        (lambda a: square(a), [(3, 4)]),
        (lambda a: scale(mean(a), 3.0), [(4, 5)]),
        (lambda a: sum_all(square(a)), [(3, 3)]),
    ]
    for build, shapes in primitive_cases:
        arrays = [rng.standard_normal(s) for s in shapes]
        arrays = [a + 0.25 * np.sign(a) for a in arrays]  # keep off relu's kink
        tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
        out = build(*tensors)
        loss = head(out) if out.shape != () else out
        loss.backward()
        for idx, (arr, ten) in enumerate(zip(arrays, tensors)):
            def f(x, idx=idx):
                probe = [Tensor(a) for a in arrays]
                probe[idx] = Tensor(x)
                o = build(*probe)
                return (head(o) if o.shape != () else o).item()
            worst = max(worst, _max_rel_err(ten.grad, _numeric_grad(f, arr)))

    # full network pass on the small survey configuration
    model = DefmModel(ModelConfig(n=6, m=8, s_dim=3, seed=3))
    Z = rng.standard_normal((6, 8))

    def model_loss() -> float:
        return mean(square(model.forward(Z))).item()

    mean(square(model.forward(Z))).backward()
    grads = {name: p.grad.copy() for name, p in model.params.items()}
    for p in model.parameters():
        p.grad = None
    eps = 1e-6
    for name, param in model.params.items():
        flat = param.data.reshape(-1)
        for i in rng.choice(flat.size, size=min(3, flat.size), replace=False):
            keep = flat[i]
            flat[i] = keep + eps
            hi = model_loss()
            flat[i] = keep - eps
            lo = model_loss()
            flat[i] = keep
            fd = (hi - lo) / (2 * eps)
            got = grads[name].reshape(-1)[i]
            worst = max(worst, abs(got - fd) / max(1.0, abs(fd)))

    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 10.0
    _report(1, ok, "max rel grad err %.2e, %.1fs" % (worst, elapsed))
    assert worst <= 1e-4
    assert elapsed < 10.0


# --------------------------------------------------- 2: combinatorics

def test_c02_embedding_counts_match_brute_force():
    t0 = time.perf_counter()
    checked, bad = 0, []
    for m in range(2, 13):
        y = np.arange(m, dtype=float)
        for s in range(2, m + 1):
            emb = build_delay_embedding(y, s)
            brute_unknown = sum(1 for r in range(s) for c in range(m) if r + c >= m)
            brute_pairs = sum(1 for r in range(1, s) for c in range(m - 1) if r + c >= m)
            if not (emb.unknown_cell_count() == brute_unknown == s * (s - 1) // 2):
                bad.append((s, m, "unknown cells"))
            if not (len(consistency_pairs(emb)) == brute_pairs == (s - 1) * (s - 2) // 2):
                bad.append((s, m, "pairs"))
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 1.0
    _report(2, ok, "%d (S, m) grids, %d mismatches, %.2fs" % (checked, len(bad), elapsed))
    assert bad == []
    assert elapsed < 1.0


# --------------------------------------------------- 3: loss semantics

def test_c03_losses_are_zero_iff_consistent():
    bad = []
    for s, m in ((3, 4), (5, 8)):
        y = np.random.default_rng(s * m).standard_normal(m + s - 1)
        emb = build_delay_embedding(y[:m], s)
        pred = full_hankel_grid(y, s, m)
        if loss_determined(pred, emb) != 0.0 or loss_future_consistency(pred, emb) != 0.0:
            bad.append((s, m, "nonzero on exact grid"))
        members = {cell for pair in consistency_pairs(emb) for cell in pair}
        for r in range(s):
            for c in range(m):
                bumped = pred.copy()
                bumped[r, c] += 0.5
                if (loss_determined(bumped, emb) > 0.0) != bool(emb.known_mask[r, c]):
                    bad.append((s, m, f"data loss at {(r, c)}"))
                if (loss_future_consistency(bumped, emb) > 0.0) != ((r, c) in members):
                    bad.append((s, m, f"consistency loss at {(r, c)}"))
    _report(3, not bad, "3x4 and 5x8 grids cellwise, %d violations" % len(bad))
    assert bad == []


# ------------------------------------- 4: single-window forecast quality

def test_c04_single_window_accuracy(plain_series):
    t0 = time.perf_counter()
    base = read_series_csv(plain_series)
    mu = base.data.mean(axis=1, keepdims=True)
    sd = base.data.std(axis=1, keepdims=True)
    scaled = SeriesMatrix((base.data - mu) / sd, dt=base.dt)
    cases = sample_cases(scaled, 10, m=45, s_dim=19, seed=ACCURACY_SAMPLE_SEED)
    hits, pccs, rmses = 0, [], []
    for case in cases:
        model = DefmForecaster(s_dim=19, target=case.target, seed=0)
        model.fit(case.window)
        est = model.predict()
        p, r = pcc(est, case.future), rmse(est, case.future)
        pccs.append(p if p is not None else -1.0)
        rmses.append(r)
        hits += int(p is not None and p >= 0.95 and r <= 0.15)
    elapsed = time.perf_counter() - t0
    ok = hits >= 8 and elapsed <= 600.0
    _report(4, ok, "%d/10 cases at PCC>=0.95 and RMSE<=0.15; mean PCC %.3f, "
                   "mean RMSE %.3f, %.0fs" %
            (hits, np.mean(pccs), np.mean(rmses), elapsed))
    assert hits >= 8
    assert elapsed <= 600.0


# --------------------------------------------- 5: comparative ordering

def _read_scores(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_c05_mean_pcc_orders_above_baselines(switching_series, outdir):
    out = outdir / "comparison.csv"
    t0 = time.perf_counter()
    assert cli.main(["benchmark", "--series", str(switching_series),
                     "--out", str(out), "--seed", COMPARISON_SEED,
                     "--noise-variances", COMPARISON_NOISE]) == 0
    elapsed = time.perf_counter() - t0
    table = {(row["method"], int(row["m"])): float(row["mean_pcc"])
             for row in _read_scores(out)}
    rivals = ("ma", "hes", "ar", "defm-no-temporal")
    margins = []
    ok = elapsed <= 3600.0
    for m in (40, 60, 80):
        lead = table[("defm", m)]
        margins.append(lead - max(table[(r, m)] for r in rivals))
        ok = ok and all(lead >= table[(r, m)] for r in rivals)
    _report(5, ok, "defm lead over best rival at m=40/60/80: %s; %.0fs" %
            ("/".join("%+.3f" % g for g in margins), elapsed))
    for m in (40, 60, 80):
        for rival in rivals:
            assert table[("defm", m)] >= table[(rival, m)], \
                f"m={m}: defm {table[('defm', m)]:.4f} < {rival} {table[(rival, m)]:.4f}"
    assert elapsed <= 3600.0


# ------------------------------------------------- 6: robustness trends

def test_c06_noise_and_fraction_robustness(plain_series, outdir):
    out = outdir / "robustness.csv"
    assert cli.main(["benchmark", "--series", str(plain_series),
                     "--out", str(out), "--seed", "11",
                     "--methods", "defm", "--m-values", "45", "--cases", "20",
                     "--noise-variances", "0,0.5,1,2",
                     "--fractions", "1.0,0.2"]) == 0
    rows = _read_scores(out)
    by = {(float(r["noise_variance"]), float(r["fraction"])): float(r["mean_pcc"])
          for r in rows}
    sweep = [by[(v, 1.0)] for v in (0.0, 0.5, 1.0, 2.0)]
    monotone = all(b <= a + 0.02 for a, b in zip(sweep, sweep[1:]))
    gap = abs(by[(0.0, 0.2)] - by[(0.0, 1.0)])
    ok = monotone and gap <= 0.1
    _report(6, ok, "noise sweep %s; 20%% supervised gap %.3f" %
            ("/".join("%.3f" % v for v in sweep), gap))
    assert monotone
    assert gap <= 0.1


# ---------------------------------------------- 7: long-term span order

def test_c07_long_term_span_ordering(outdir):
    path = outdir / "cycle.csv"
    assert cli.main(["generate", "--out", str(path), "--seed", "42",
                     "--coupling", LONG_TERM_COUPLING,
                     "--rho", LONG_TERM_RHO, "--duration", "20"]) == 0
    means = {}
    for span in (10, 20, 30):
        run_dir = outdir / f"lt{span}"
        assert cli.main(["long-term", "--series", str(path),
                         "--out-dir", str(run_dir), "--m", "40",
                         "--s-dim", str(span + 1), "--steps", "300",
                         "--target", LONG_TERM_TARGET, "--seed", "0",
                         "--feedback", "observed"]) == 0
        meta = read_json(run_dir / "run.meta.json")
        scores = [w["pcc"] for w in meta["per_window_scores"] if w["pcc"] is not None]
        means[span] = float(np.mean(scores))
    ok = means[10] >= means[20] >= means[30]
    _report(7, ok, "mean window PCC by span: 10->%.3f 20->%.3f 30->%.3f" %
            (means[10], means[20], means[30]))
    assert means[10] >= means[20] >= means[30]


# --------------------------------------------------- 8: integrator

def test_c08_integrator_validity():
    def halving_rel(dt: float, oscillators: int) -> float:
        coarse = LorenzConfig(seed=3, oscillators=oscillators, transient=0.0,
                              dt_integrate=dt)
        fine = LorenzConfig(seed=3, oscillators=oscillators, transient=0.0,
                            dt_integrate=dt / 2)
        a = integrate_lorenz(coarse, 10.0).data
        b = integrate_lorenz(fine, 10.0).data
        return float(np.abs(a - b).max() / np.abs(a).max())

    rel = halving_rel(0.002, 3)
    # halving dt should shrink the discrepancy ~16x for a 4th-order scheme;
    # chaotic divergence loosens the ratio, so accept a generous band
    ratio = halving_rel(0.002, 30) / halving_rel(0.001, 30)
    order_ok = 6.0 <= ratio <= 40.0

    origin = integrate_lorenz(LorenzConfig(seed=0, transient=1.0), 5.0,
                              state=np.zeros(90))
    origin_fixed = bool(np.all(origin.data == 0.0))

    long_run = integrate_lorenz(LorenzConfig(seed=4, oscillators=5, transient=0.0),
                                500.0).data
    bound = float(np.abs(long_run).max())
    ok = (rel <= 1e-5 and order_ok and origin_fixed
          and np.isfinite(long_run).all() and bound < 100.0)
    _report(8, ok, "step-halving rel %.1e; halving ratio %.1f; origin exact %s; "
            "500-unit max |state| %.0f" % (rel, ratio, origin_fixed, bound))
    assert rel <= 1e-5
    assert order_ok
    assert origin_fixed
    assert bound < 100.0


# --------------------------------------------------- 9: baseline oracles

def test_c09_baselines_match_recurrence_oracles():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        y = rng.standard_normal(12)

        buf = list(y)
        ma_oracle = []
        for _ in range(6):
            ma_oracle.append(sum(buf[-4:]) / 4.0)
            buf.append(ma_oracle[-1])
        worst = max(worst, float(np.abs(forecast_ma(y, 4, 6) - ma_oracle).max()))

        level, slope = y[0], y[1] - y[0]
        for t in range(1, len(y)):
            prev = level
            level = 0.5 * y[t] + 0.5 * (level + slope)
            slope = 0.3 * (level - prev) + 0.7 * slope
        hes_oracle = [level + tau * slope for tau in range(1, 7)]
        worst = max(worst, float(np.abs(forecast_hes(y, 0.5, 0.3, 6) - hes_oracle).max()))

        coeffs, intercept, mu = fit_ar(y, 3)
        hist = list(y[-3:] - mu)
        ar_oracle = []
        for _ in range(6):
            nxt = intercept + sum(c * h for c, h in zip(coeffs, hist[::-1]))
            ar_oracle.append(nxt + mu)
            hist = hist[1:] + [nxt]
        worst = max(worst, float(np.abs(forecast_ar(y, 3, 6) - ar_oracle).max()))

    decay = 5.0 * 0.8 ** np.arange(20)
    coeffs, _, _ = fit_ar(decay, 1)
    coeff_err = abs(coeffs[0] - 0.8)
    horizon_err = float(np.abs(forecast_ar(decay, 1, 5)
                               - 5.0 * 0.8 ** np.arange(20, 25)).max())
    ok = worst <= 1e-10 and coeff_err <= 1e-10 and horizon_err <= 1e-10
    _report(9, ok, "max oracle gap %.1e; AR(1) coeff err %.1e" % (worst, coeff_err))
    assert worst <= 1e-10
    assert coeff_err <= 1e-10
    assert horizon_err <= 1e-10


# --------------------------------------------------- 10: metric properties

def test_c10_metric_properties():
    rng = np.random.default_rng(17)
    worst_affine, range_ok, axiom_ok = 0.0, True, True
    for _ in range(1000):
        x, y, z = rng.standard_normal((3, 20))
        a = float(rng.uniform(0.5, 3.0)) * (1 if rng.uniform() < 0.5 else -1)
        b = float(rng.uniform(-5.0, 5.0))
        base = pcc(x, y)
        worst_affine = max(worst_affine, abs(pcc(a * x + b, y) - np.sign(a) * base))
        range_ok = range_ok and -1.0 <= base <= 1.0
        axiom_ok = axiom_ok and rmse(x, y) >= 0.0 and rmse(x, x) == 0.0 \
            and rmse(x, y) == rmse(y, x) \
            and rmse(x, z) <= rmse(x, y) + rmse(y, z) + 1e-12
    undefined_ok = pcc(np.full(8, 2.0), np.arange(8.0)) is None \
        and pcc(np.arange(8.0), np.full(8, 2.0)) is None
    ok = worst_affine <= 1e-9 and range_ok and axiom_ok and undefined_ok
    _report(10, ok, "1000 vectors: max affine drift %.1e, range %s, axioms %s, "
                    "zero-variance flagged %s"
            % (worst_affine, range_ok, axiom_ok, undefined_ok))
    assert worst_affine <= 1e-9
    assert range_ok and axiom_ok and undefined_ok


# --------------------------------------------------- 11: reproducibility

def test_c11_cli_outputs_are_byte_identical(outdir):
    tiny_arch = ["--attn-dim", "8", "--heads", "2", "--ff-dim", "12",
                 "--spatial-hidden", "10,7", "--merge-hidden", "9"]
    compared, mismatched = [], []

    def twice(name: str, build_args) -> None:
        outs = []
        for run in ("a", "b"):
            root = outdir / f"repro_{name}_{run}"
            root.mkdir(exist_ok=True)
            produced = build_args(root)
            assert cli.main(produced["args"]) == 0
            outs.append([Path(p).read_bytes() for p in produced["files"]])
        if outs[0] != outs[1]:
            mismatched.append(name)
        compared.append((name, len(outs[0])))

    def gen(root):
        out = root / "series.csv"
        return {"args": ["generate", "--out", str(out), "--seed", "9",
                         "--oscillators", "2", "--duration", "6",
                         "--transient", "1"],
                "files": [out, Path(str(out) + ".meta.json")]}
    twice("generate", gen)

    seed_series = outdir / "repro_generate_a" / "series.csv"

    def train(root):
        return {"args": ["train-predict", "--series", str(seed_series),
                         "--out-dir", str(root), "--m", "20", "--s-dim", "4",
                         "--target", "1", "--epochs", "30", "--seed", "5",
                         *tiny_arch],
                "files": [root / "forecast.csv", root / "train_log.csv",
                          root / "run.meta.json"]}
    twice("train-predict", train)

    def longterm(root):
        return {"args": ["long-term", "--series", str(seed_series),
                         "--out-dir", str(root), "--m", "20", "--s-dim", "3",
                         "--steps", "6", "--target", "1", "--epochs", "30",
                         "--seed", "5", "--feedback", "observed", *tiny_arch],
                "files": [root / "long_term.csv", root / "run.meta.json"]}
    twice("long-term", longterm)

    def bench(root):
        out = root / "scores.csv"
        return {"args": ["benchmark", "--series", str(seed_series),
                         "--out", str(out), "--seed", "13",
                         "--methods", "defm,ma,ar", "--m-values", "20",
                         "--cases", "2", "--s-dim", "4", "--epochs", "10"],
                "files": [out, Path(str(out) + ".meta.json")]}
    twice("benchmark", bench)

    forecast_csv = outdir / "repro_train-predict_a" / "forecast.csv"

    def plot(root):
        out = root / "chart.svg"
        return {"args": ["plot", "--forecasts", str(forecast_csv),
                         "--out", str(out), "--labels", "window"],
                "files": [out]}
    twice("plot", plot)

    detail = ", ".join("%s x%d" % pair for pair in compared)
    _report(11, not mismatched, "byte-compared artifact sets: " + detail
            + ("; differing: " + ", ".join(mismatched) if mismatched else ""))
    assert mismatched == []
