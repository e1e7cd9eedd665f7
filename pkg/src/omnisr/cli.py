"""Command-line surface.

Commands cover the individual transforms (project/backproject/degrade), the
round-trip resampling benchmark, the full restoration pipeline (sr), metric
evaluation, the gamma ablation grid, and a selftest that exercises the
library's core invariants.

Exit codes: 0 ok, 2 configuration/domain error, 3 I/O or file-format error,
4 wire-protocol error, 5 invariant/coverage failure. ``OMNISR_THREADS``
caps worker-thread parallelism in the numeric backends.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import numpy as np

from . import config as cfgmod
from .correct import GammaConfig, gd_correct, reanchor
from .degrade import apply_degradation, apply_pinv, build_degradation, dense_operator, dense_pinv
from .errors import ConfigError, FileFormatError, InvariantFailure, OmnisrError
from .geometry import ErpGrid, TangentLayout, TangentPlaneSpec, octadecaplex_layout
from .imgio import load_raster, load_tensor, read_image, save_tensor, write_image
from .metrics import psnr, ssim, ws_psnr, ws_ssim
from .pipeline import PipelineConfig, ablate_gamma as run_ablation, run_pipeline
from .resample import (
    ResampleConfig,
    TangentStack,
    bench_round_trip,
    erp_to_tp,
    seam_metric,
    tp_to_erp,
)

MANIFEST_NAME = "manifest.txt"


def _apply_thread_cap():
    cap = os.environ.get("OMNISR_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        raise ConfigError(f"OMNISR_THREADS must be an integer, got {cap!r}")
    import cv2

    cv2.setNumThreads(n)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))
    try:
        import numba

        numba.set_num_threads(n)
    except ImportError:
        pass


def _parse_preup(text: str) -> tuple:
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"pre-upsampling pair must be 'erp,tp', got {text!r}")
    return a, b


def write_manifest(path: str, layout: TangentLayout):
    lines = ["# tangent plane layout", "# columns: index theta_c phi_c fov_deg resolution"]
    for i, plane in enumerate(layout):
        lines.append(
            f"{i} {plane.center_theta:.17g} {plane.center_phi:.17g} "
            f"{np.degrees(plane.fov):.17g} {plane.resolution}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: str) -> TangentLayout:
    planes = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"cannot read manifest {path!r}: {exc}") from exc
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            idx, theta, phi, fov_deg, resolution = line.split()
            planes.append(
                (
                    int(idx),
                    TangentPlaneSpec(
                        center_theta=float(theta),
                        center_phi=float(phi),
                        fov=np.radians(float(fov_deg)),
                        resolution=int(resolution),
                    ),
                )
            )
        except ValueError as exc:
            raise FileFormatError(f"bad manifest line {raw!r}: {exc}") from exc
    if not planes:
        raise FileFormatError(f"manifest {path!r} lists no planes")
    planes.sort(key=lambda item: item[0])
    if [i for i, _ in planes] != list(range(len(planes))):
        raise FileFormatError(f"manifest {path!r} has gaps in plane indices")
    return TangentLayout(planes=tuple(p for _, p in planes))


def _echo_config(cfg: PipelineConfig):
    click.echo("# resolved configuration")
    for line in cfgmod.resolved_text(cfg).splitlines():
        click.echo(f"# {line}")


@click.group()
def cli():
    """Omnidirectional image super-resolution toolkit."""


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--fov", default=100.0, show_default=True, help="Plane field of view, degrees.")
@click.option("--resolution", default=0, show_default="ERP height / 2", help="Plane raster size.")
@click.option("--kernel", default="bicubic", show_default=True)
@click.option("--preup-erp", default=1, show_default=True)
def project(input_path, out_dir, fov, resolution, kernel, preup_erp):
    """Render an ERP raster into tangent-plane PNGs plus a layout manifest."""
    erp = load_raster(input_path)
    if not resolution:
        resolution = erp.shape[0] // 2
    layout = octadecaplex_layout(fov_deg=fov, resolution=resolution)
    cfg = ResampleConfig(kernel=kernel, preup_erp=preup_erp)
    stack = erp_to_tp(erp, layout, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / MANIFEST_NAME, layout)
    for i in range(stack.images.shape[0]):
        write_image(out / f"plane_{i:02d}.png", stack.images[i])
    click.echo(f"wrote {stack.images.shape[0]} planes to {out}")


@cli.command()
@click.argument("tp_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--width", required=True, type=int, help="Output ERP width.")
@click.option("--height", required=True, type=int, help="Output ERP height.")
@click.option("--kernel", default="bicubic", show_default=True)
@click.option("--preup-tp", default=1, show_default=True)
@click.option("--blend", default="cosine_power", show_default=True)
@click.option("--blend-power", default=2.0, show_default=True)
def backproject(tp_dir, output_path, width, height, kernel, preup_tp, blend, blend_power):
    """Fuse a tangent-plane directory (with manifest) back into an ERP PNG."""
    layout = read_manifest(Path(tp_dir) / MANIFEST_NAME)
    images = []
    for i in range(len(layout)):
        plane_path = Path(tp_dir) / f"plane_{i:02d}.png"
        if not plane_path.exists():
            raise FileFormatError(f"missing plane image {plane_path}")
        images.append(read_image(plane_path))
    stack = TangentStack(layout, np.stack(images))
    cfg = ResampleConfig(kernel=kernel, preup_tp=preup_tp, blend=blend, blend_power=blend_power)
    erp = tp_to_erp(stack, ErpGrid(width, height), cfg)
    write_image(output_path, erp)
    click.echo(f"wrote {output_path}")


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--preup",
    "preups",
    multiple=True,
    default=("1,1", "4,1", "4,2", "2,4", "1,4", "4,4"),
    show_default=True,
    help="erp,tp pre-upsampling pair; repeatable.",
)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path (default stdout).")
def roundtrip(input_path, preups, out):
    """Round-trip resampling benchmark over a pre-upsampling grid (CSV)."""
    erp = load_raster(input_path)
    rows = ["preup_erp,preup_tp,ws_psnr,ws_ssim"]
    for pair_text in preups:
        pair = _parse_preup(pair_text)
        _, wp, wssim = bench_round_trip(erp, pair)
        rows.append(f"{pair[0]},{pair[1]},{wp:.6f},{wssim:.6f}")
    text = "\n".join(rows) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--scale", default=4, show_default=True, type=int)
def degrade(input_path, output_path, scale):
    """Downsample an HR raster by the degradation operator."""
    img = load_raster(input_path)
    d = build_degradation(scale, img.shape[:2])
    lr = apply_degradation(d, img)
    if output_path.endswith(".osst"):
        save_tensor(output_path, lr)
    else:
        write_image(output_path, lr)
    click.echo(f"wrote {output_path}")


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--scale", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--denoiser", type=click.Choice(["identity", "tv", "external"]), default=None)
@click.option("--endpoint", default=None, help="External denoiser endpoint (host:port or unix:/path).")
@click.option("--gamma-p", type=float, default=None)
@click.option("--gamma-e", type=float, default=None)
@click.option("--gamma-l", type=float, default=None)
@click.option("--preup", default=None, help="erp,tp pre-upsampling pair for the loop projections.")
@click.option("--kernel", default=None)
@click.option("--tp-resolution", type=int, default=None)
@click.option("--lam-max", type=float, default=None, help="TV denoiser strength.")
@click.option("--seed", type=int, default=None)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
@click.option("--reference", type=click.Path(exists=True, dir_okay=False), default=None)
def sr(
    input_path,
    output_path,
    config_path,
    scale,
    steps,
    denoiser,
    endpoint,
    gamma_p,
    gamma_e,
    gamma_l,
    preup,
    kernel,
    tp_resolution,
    lam_max,
    seed,
    report_path,
    reference,
):
    """Restore a high-resolution ERP raster from a low-resolution input."""
    values = cfgmod.load_config(config_path) if config_path else {}
    overrides = {
        "pipeline.scale": scale,
        "pipeline.steps": steps,
        "pipeline.denoiser": denoiser,
        "denoiser.endpoint": endpoint,
        "denoiser.lam_max": lam_max,
        "gamma.p": gamma_p,
        "gamma.e": gamma_e,
        "gamma.l": gamma_l,
        "resample.kernel": kernel,
        "pipeline.tp_resolution": tp_resolution,
        "pipeline.seed": seed,
    }
    if preup is not None:
        pe, pt = _parse_preup(preup)
        overrides["resample.preup_erp"] = pe
        overrides["resample.preup_tp"] = pt
    cfg = cfgmod.build_pipeline_config(values, overrides)
    _echo_config(cfg)
    lr = load_raster(input_path)
    ref = load_raster(reference) if reference else None
    out, report = run_pipeline(lr, cfg, reference=ref)
    if output_path.endswith(".osst"):
        save_tensor(output_path, out)
    else:
        write_image(output_path, out)
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            for line in cfgmod.resolved_text(cfg).splitlines():
                fh.write(f"# {line}\n")
            for line in report.lines():
                fh.write(line + "\n")
            for key, val in report.final_metrics.items():
                fh.write(f"final {key}={val:.6f}\n")
    if report.final_metrics:
        click.echo(
            "metrics: "
            + " ".join(f"{k}={v:.4f}" for k, v in report.final_metrics.items())
        )
    click.echo(f"wrote {output_path}")


@cli.command("eval")
@click.option("--ref", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def eval_cmd(ref, test, out):
    """Write a metrics CSV comparing two rasters."""
    ref_img = load_raster(ref)
    test_img = load_raster(test)
    text = "ws_psnr,ws_ssim,psnr,ssim\n" + (
        f"{ws_psnr(ref_img, test_img):.6f},{ws_ssim(ref_img, test_img):.6f},"
        f"{psnr(ref_img, test_img):.6f},{ssim(ref_img, test_img):.6f}\n"
    )
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@cli.command("ablate-gamma")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("reference_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--gamma-p", default="1.0", show_default=True, help="Comma-separated grid values.")
@click.option("--gamma-e", default="1.0", show_default=True)
@click.option("--gamma-l", default="0.0,0.5,1.0", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--steps", type=int, default=None)
@click.option("--scale", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def ablate_gamma_cmd(input_path, reference_path, gamma_p, gamma_e, gamma_l, config_path, steps, scale, out):
    """Run the pipeline over a gamma grid and emit a CSV of metrics."""

    def grid(text):
        try:
            return [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"bad gamma grid {text!r}")

    values = cfgmod.load_config(config_path) if config_path else {}
    cfg = cfgmod.build_pipeline_config(
        values, {"pipeline.steps": steps, "pipeline.scale": scale}
    )
    _echo_config(cfg)
    lr = load_raster(input_path)
    ref = load_raster(reference_path)
    rows = run_ablation(lr, ref, cfg, grid(gamma_p), grid(gamma_e), grid(gamma_l))
    text = "gamma_p,gamma_e,gamma_l,ws_psnr,ws_ssim\n" + "".join(
        f"{gp:g},{ge:g},{gl:g},{wp:.6f},{ws:.6f}\n" for gp, ge, gl, wp, ws in rows
    )
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


def selftest_checks():
    """Yield (name, ok, detail) for the library's core invariants."""
    rng = np.random.default_rng(20240)
    results = []

    def check(name, ok, detail=""):
        results.append((name, bool(ok), detail))

    # gnomonic round trip
    from .geometry import SphereCoord, angular_distance, sphere_to_tangent, tangent_to_sphere

    layout = octadecaplex_layout(resolution=64)
    worst = 0.0
    for plane in layout.planes[:3]:
        n = 5000
        center = SphereCoord(plane.center_theta, plane.center_phi)
        thetas = plane.center_theta + rng.uniform(-plane.half_fov * 0.7, plane.half_fov * 0.7, n)
        phis = np.clip(
            plane.center_phi + rng.uniform(-plane.half_fov * 0.7, plane.half_fov * 0.7, n),
            -1.5,
            1.5,
        )
        x, y = sphere_to_tangent(thetas, phis, center)
        back_theta, back_phi = tangent_to_sphere(x, y, center)
        err = angular_distance(thetas, phis, back_theta, back_phi)
        worst = max(worst, float(err.max()))
    check("gnomonic-round-trip", worst < 1e-12, f"max angular error {worst:.2e} rad")

    # layout coverage
    from .geometry import coverage_margin

    n = 100_000
    z = rng.uniform(-1, 1, n)
    margin = coverage_margin(layout, rng.uniform(-np.pi, np.pi, n), np.arcsin(z))
    check("layout-coverage", margin > 0, f"margin {margin:.4f}")

    # pseudo-inverse identities
    d = build_degradation(4, (64, 128))
    err1 = np.abs(d.d_v @ d.d_v_pinv - np.eye(16)).max()
    err2 = np.abs(d.d_h @ d.d_h_pinv - np.eye(32)).max()
    check("pinv-right-inverse", max(err1, err2) < 1e-10, f"max |A A+ - I| {max(err1, err2):.2e}")
    small = build_degradation(2, (8, 16))
    dense = dense_operator(small)
    x = rng.random((8, 16))
    sep = apply_degradation(small, x)
    err = np.abs(dense @ x.ravel() - sep.ravel()).max()
    check("separable-vs-dense", err < 1e-12, f"max diff {err:.2e}")

    # GD correction properties
    e = rng.random((64, 128, 2))
    e_init = rng.random((16, 32, 2))
    out0 = gd_correct(e, e_init, d, 0.0)
    check("gd-gamma0-identity", np.array_equal(out0, e))
    out1 = gd_correct(e, e_init, d, 1.0)
    err = np.abs(apply_degradation(d, out1) - e_init).max()
    check("gd-gamma1-consistency", err < 1e-6, f"residual {err:.2e}")
    gamma, k = 0.4, 3
    multi = e
    for _ in range(k):
        multi = gd_correct(multi, e_init, d, gamma)
    single = gd_correct(e, e_init, d, 1.0 - (1.0 - gamma) ** k)
    err = np.abs(multi - single).max()
    check("gd-kfold-composition", err < 1e-8, f"max diff {err:.2e}")

    # metrics sanity
    img = rng.random((32, 64, 3))
    offset = np.clip(img * 0.5 + 0.1, 0, 1)
    delta = 0.125
    val = ws_psnr(offset, offset + delta)
    expect = -20.0 * np.log10(delta)
    check("wspsnr-uniform-offset", abs(val - expect) < 0.01, f"{val:.4f} vs {expect:.4f}")
    check("wsssim-identical", ws_ssim(img, img) == 1.0)
    check(
        "wspsnr-flip-invariance",
        abs(ws_psnr(img, offset) - ws_psnr(img[::-1], offset[::-1])) < 1e-10,
    )

    # file formats
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        t_path = Path(tmp) / "t.osst"
        arr = rng.random((3, 5, 4))
        save_tensor(t_path, arr)
        check("tensor-file-round-trip", np.array_equal(load_tensor(t_path), arr))
        p_path = Path(tmp) / "t.png"
        write_image(p_path, img)
        err = np.abs(read_image(p_path) - img).max()
        check("png16-round-trip", err <= 0.5 / 65535 + 1e-12, f"max err {err:.2e}")

    # wire framing
    from . import wire

    payload = wire.pack_payload(img.astype(np.float32), 7, 20, 18)
    arr, t, total, m = wire.unpack_payload(payload)
    check(
        "wire-payload-round-trip",
        np.array_equal(arr, img.astype(np.float32)) and (t, total, m) == (7, 20, 18),
    )

    # config echo round trip
    cfg = PipelineConfig(denoiser_opts={"lam_max": 0.005})
    check("config-echo-round-trip", cfgmod.roundtrip_config(cfg) == cfg)

    # end-to-end determinism and seam continuity on a tiny run
    from .testimages import cartoon_panorama

    gt = cartoon_panorama(64, 128, seed=5)
    d2 = build_degradation(2, (64, 128))
    lr = apply_degradation(d2, gt)
    run_cfg = PipelineConfig(
        total_steps=2,
        scale=2,
        denoiser="identity",
        resample=ResampleConfig(kernel="bicubic", preup_erp=2, preup_tp=2),
    )
    out_a, _ = run_pipeline(lr, run_cfg)
    out_b, _ = run_pipeline(lr, run_cfg)
    check("pipeline-determinism", np.array_equal(out_a, out_b))
    seam, interior = seam_metric(out_a)
    check("pipeline-seam-continuity", seam <= 2 * interior, f"seam {seam:.2e} interior {interior:.2e}")
    return results


@cli.command()
def selftest():
    """Run the invariant suite; prints one pass/fail line per property."""
    failures = 0
    for name, ok, detail in selftest_checks():
        status = "PASS" if ok else "FAIL"
        suffix = f": {detail}" if detail else ""
        click.echo(f"{status} {name}{suffix}")
        if not ok:
            failures += 1
    if failures:
        raise InvariantFailure(f"{failures} selftest properties failed")
    click.echo("all properties passed")


def main():
    _apply_thread_cap()
    try:
        cli.main(args=sys.argv[1:], prog_name="omnisr", standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except OmnisrError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()
