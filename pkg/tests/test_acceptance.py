"""Acceptance gate: one test and one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also repeated in the terminal summary.
"""

import time

import numpy as np

import gradcases
import reference
from penet import cli, ops, weights
from penet.gradcheck import penet_grad_check
from penet.imageio import ImageBuffer, from_tensor, read_ppm, write_ppm
from penet.model import penet_forward, zero_params
from penet.pyramid import decompose, reconstruct
from penet.train import train_demo

GRAD_TOL = 1e-4


def test_c1_pyramid_roundtrip(criterion):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, odd = 0.0, 0
    for _ in range(1000):
        h, w = rng.integers(8, 65, size=2)
        odd += bool(h % 2 or w % 2)
        x = rng.random((3, h, w), dtype=np.float32)
        worst = max(worst, float(np.abs(reconstruct(decompose(x)) - x).max()))
    elapsed = time.perf_counter() - start
    ok = criterion("C1 pyramid round trip (1000 images, 32-bit) <= 1e-5 in < 30 s",
                   worst <= 1e-5 and elapsed < 30 and odd > 0,
                   f"max err {worst:.2e}, {odd} with odd dims, {elapsed:.1f} s")
    assert ok


def test_c2_component_dims(criterion):
    pyr = decompose(np.zeros((3, 608, 608), dtype=np.float32))
    dims = [c.shape[1:] for c in pyr.components]
    ok = criterion("C2 608x608 components are 608, 304, 152, 76 square",
                   dims == [(608, 608), (304, 304), (152, 152), (76, 76)], str(dims))
    assert ok


def test_c3_zero_weight_oracle(criterion):
    rng = np.random.default_rng(3)
    images = [rng.random((3, 8, 8)) for _ in range(3)]
    images += [np.zeros((3, 8, 8)), np.ones((3, 8, 8)), np.full((3, 8, 8), 0.3)]
    zero = zero_params()
    zero_dict = zero.to_dict()
    worst = 0.0
    for x in images:
        brute = np.array(reference.penet_forward(x, zero_dict))
        got = penet_forward(x.astype(np.float32), zero, clamp=False)
        worst = max(worst, float(np.abs(got - brute).max()), float(np.abs(got - 2 * x).max()))
    ok = criterion("C3 zero weights give 2x pre-clamp, matches brute force on 8x8, within 1e-4",
                   worst <= 1e-4, f"max err {worst:.2e} over {len(images)} images")
    assert ok


def test_c4_gradient_suite(criterion):
    start = time.perf_counter()
    errors = {name: max(gradcases.run_case(name, s) for s in range(20))
              for name in sorted(gradcases.OPERATOR_CASES)}
    errors["full model"] = max(penet_grad_check(seed=s) for s in range(5))
    elapsed = time.perf_counter() - start
    failed = [n for n, e in errors.items() if not e < GRAD_TOL]
    worst = max(errors, key=errors.get)
    ok = criterion(
        "C4 gradient suite (20 seeds per operator, 5 full model) rel err < 1e-4 in < 5 min",
        not failed and elapsed < 300,
        f"worst {errors[worst]:.2e} ({worst}), {len(errors)} cases, {elapsed:.0f} s"
        + (f", failing: {failed}" if failed else ""),
    )
    assert ok


def test_c5_sobel(criterion):
    sh_c, sw_c = ops.depthwise_sobel(np.full((3, 6, 7), 0.7))
    ramp = np.repeat(np.arange(6.0)[:, None], 7, axis=1)[None].repeat(3, axis=0)
    sh, sw = ops.depthwise_sobel(ramp)
    ok = criterion(
        "C5 Sobel: constant -> 0, vertical ramp interior -> h 8 and w 0 exactly",
        not sh_c.any() and not sw_c.any()
        and np.all(sh[:, 1:-1, 1:-1] == 8.0) and np.all(sw[:, 1:-1, 1:-1] == 0.0),
    )
    assert ok


def test_c6_train_demo(criterion):
    start = time.perf_counter()
    first = train_demo(weights.init_params(42), steps=200, lr=0.01, seed=42)
    elapsed = time.perf_counter() - start
    second = train_demo(weights.init_params(42), steps=200, lr=0.01, seed=42)
    ratio = first[-1] / first[0]
    ok = criterion(
        "C6 train demo (200 steps, lr 0.01, seed 42) final < 0.1 x initial, deterministic, < 2 min",
        ratio < 0.1 and first == second and elapsed < 120,
        f"initial {first[0]:.4g}, final {first[-1]:.4g}, ratio {ratio:.3f}, "
        f"{'deterministic' if first == second else 'NOT deterministic'}, {elapsed:.0f} s",
    )
    assert ok


def test_c7_weight_file(criterion, tmp_path):
    path = tmp_path / "w.penw"
    weights.save(weights.init_params(7), path)
    data = path.read_bytes()
    weights.save(weights.load(path), path)
    identical = path.read_bytes() == data

    missing = weights.PENetParams.from_dict(weights.init_params(7).to_dict())
    entries = [(n, a) for n, a in missing.named_tensors() if n != "level0.eb.f3.weight"]
    blob = weights.MAGIC + np.array([weights.VERSION, len(entries)], "<u4").tobytes()
    for name, arr in entries:
        raw = name.encode()
        blob += (np.array([len(raw)], "<u2").tobytes() + raw + bytes([arr.ndim])
                 + np.array(arr.shape, "<u4").tobytes() + arr.astype("<f4").tobytes())
    try:
        weights.decode(blob)
        message = None
    except weights.WeightSchemaError as exc:
        message = str(exc)
    ok = criterion(
        "C7 weight file round trip byte-identical, missing tensor rejected by name",
        identical and message is not None and "level0.eb.f3.weight" in message,
        f"error: {message}",
    )
    assert ok


def _enhance_constant(tmp_path, value):
    w = str(tmp_path / "zero.penw")
    assert cli.main(["init", "--zero", "--out", w]) == 0
    src, out = str(tmp_path / "in.ppm"), str(tmp_path / "out.ppm")
    write_ppm(from_tensor(np.full((3, 16, 16), value)), src)
    code = cli.main(["enhance", "--weights", w, "--input", src, "--output", out])
    return code, read_ppm(src).pixels[0], set(read_ppm(out).pixels)


def test_c8a_cli_constant_03(criterion, tmp_path):
    code, byte_in, got = _enhance_constant(tmp_path, 0.3)
    ok = criterion("C8a CLI zero-weight enhance of constant 0.3 -> byte 153",
                   code == 0 and got == {153},
                   f"input stored as byte {byte_in}, output bytes {sorted(got)}")
    assert ok


def test_c8b_cli_constant_08(criterion, tmp_path):
    code, byte_in, got = _enhance_constant(tmp_path, 0.8)
    ok = criterion("C8b CLI zero-weight enhance of constant 0.8 -> byte 255",
                   code == 0 and got == {255},
                   f"input stored as byte {byte_in}, output bytes {sorted(got)}")
    assert ok


def test_c8c_cli_pyramid_mid_gray(criterion, tmp_path):
    src = str(tmp_path / "in.ppm")
    write_ppm(ImageBuffer(24, 16, bytes([37]) * (3 * 24 * 16)), src)
    code = cli.main(["pyramid", "--input", src, "--outdir", str(tmp_path / "out")])
    layers = [set(read_ppm(tmp_path / "out" / f"L{i}.ppm").pixels) for i in (1, 2, 3)]
    base = set(read_ppm(tmp_path / "out" / "base.ppm").pixels)
    ok = criterion("C8c CLI pyramid of constant image -> byte 128 difference layers",
                   code == 0 and all(s == {128} for s in layers) and base == {37},
                   f"layers {[sorted(s) for s in layers]}, base {sorted(base)}")
    assert ok


def test_c8d_cli_exit_codes(criterion, tmp_path, capsys):
    def code(argv):
        try:
            return cli.main(argv)
        except SystemExit as exc:
            return exc.code

    w = str(tmp_path / "w.penw")
    src = str(tmp_path / "in.ppm")
    write_ppm(ImageBuffer(8, 8, bytes(192)), src)
    bad = tmp_path / "bad.ppm"
    bad.write_bytes(b"P6\n2 2\n255\n" + bytes(11))
    cases = {
        "init": (["init", "--out", w], 0),
        "enhance": (["enhance", "--weights", w, "--input", src, "--output", str(tmp_path / "o.ppm")], 0),
        "gradcheck --seed 1": (["gradcheck", "--seed", "1"], 0),
        "train-demo --steps 0": (["train-demo", "--steps", "0"], 1),
        "missing --weights": (["enhance", "--input", src, "--output", "x.ppm"], 2),
        "truncated ppm": (["enhance", "--weights", w, "--input", str(bad), "--output", "x.ppm"], 2),
        "schema error": (["enhance", "--weights", src, "--input", src, "--output", "x.ppm"], 2),
        "unwritable outdir": (["pyramid", "--input", src, "--outdir", str(bad / "d")], 2),
    }
    got = {name: code(argv) for name, (argv, _) in cases.items()}
    capsys.readouterr()
    wrong = {n: got[n] for n, (_, want) in cases.items() if got[n] != want}
    ok = criterion("C8d CLI exit codes follow 0/1/2", not wrong,
                   f"{len(cases)} cases" + (f", wrong: {wrong}" if wrong else ""))
    assert ok
