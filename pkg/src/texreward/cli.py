"""Batch command-line front end.

Subcommands: bake-curvature, project-field, find-symmetry, eval, grad-check,
optimize. Every command resolves all defaults, writes its artifacts, then a
run manifest (atomically, as the last artifact); on failure the partial
outputs are removed. Exit codes: 0 success, 1 check/assertion failure,
2 input error.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .baking import bake_vertex_scalar, load_scalar_map, save_scalar_map
from .curvature import normalize_scalar_field, principal_curvatures
from .errors import RewardInputError, TexRewardError
from .imageops import load_texture, save_gradient_map, save_texture
from .mesh import build_adjacency, load_obj
from .optim import OptConfig, noise_texture, optimize_texture, write_trace_csv
from .rewards import (
    RewardContext,
    RewardSpec,
    evaluate,
    write_result_json,
)
from .symmetry import (
    estimate_symmetry_plane,
    load_pairs_jsonl,
    mirror_pairs,
    save_pairs_jsonl,
    save_plane_json,
)
from .uvfield import (
    build_uv_field,
    load_field_jsonl,
    save_field_jsonl,
    smooth_uv_field,
)

GRAD_CHECK_MAX_SIDE = 32
GRAD_REL_TOL = 1e-4
GRAD_ABS_TOL = 1e-8


_ACTIVE_RUN = None  # one command per process; lets main() clean up on error


class _Run:
    """Tracks created artifacts and writes the manifest last."""

    def __init__(self, command, args, input_paths):
        global _ACTIVE_RUN
        self.command = command
        self.args = args
        self.input_paths = [p for p in input_paths if p]
        self.outputs = []
        self.started = time.monotonic()
        _ACTIVE_RUN = self

    def track(self, path):
        self.outputs.append(str(path))
        return path

    def cleanup(self):
        for path in self.outputs:
            try:
                os.unlink(path)
            except OSError:
                pass

    def write_manifest(self, path):
        config = {k: v for k, v in sorted(vars(self.args).items())
                  if k != "func"}
        digests = {}
        for p in self.input_paths:
            h = hashlib.sha256()
            with open(p, "rb") as fh:
                h.update(fh.read())
            digests[str(p)] = h.hexdigest()
        doc = {
            "command": self.command,
            "config": config,
            "inputs": digests,
            "version": __version__,
            "threads": os.environ.get("TEXREWARD_THREADS", "0"),
            "duration_s": round(time.monotonic() - self.started, 6),
        }
        tmp = f"{path}.tmp"
        with open(tmp, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        os.replace(tmp, path)
        self.outputs.append(str(path))


def _parse_size(text):
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except Exception:
        raise ValueError(f"bad size '{text}', expected WIDTHxHEIGHT") from None
    if w < 4 or h < 4:
        raise ValueError("size must be at least 4x4")
    return w, h


def cmd_bake_curvature(args):
    mesh = load_obj(args.mesh, flip_v=args.flip_v)
    run = _Run("bake-curvature", args, [args.mesh])
    w, h = _parse_size(args.size)
    curv = principal_curvatures(mesh, radius_rings=args.rings)
    normalized = normalize_scalar_field(curv.mean_h, target=args.range,
                                        clip_percentile=args.clip)
    smap = bake_vertex_scalar(mesh, normalized, w, h, range_tag=args.range)
    for path in save_scalar_map(smap, args.out):
        run.track(path)
    shown = smap
    if args.dilate:
        # visualization only: the raw export above stays the true bake
        from .baking import dilate_once
        shown = dilate_once(smap)
        from PIL import Image
        if shown.range_tag == "unit":
            scaled = shown.values
        else:
            scaled = (shown.values + 1.0) / 2.0
        img = np.floor(np.clip(scaled, 0, 1) * 255.0 + 0.5).astype(np.uint8)
        Image.fromarray(img, mode="L").save(f"{args.out}.png")
    from .report import save_scalar_map_figure
    save_scalar_map_figure(shown, run.track(f"{args.out}_figure.png"))
    run.write_manifest(f"{args.out}.manifest.json")
    print(f"baked {int(smap.covered.sum())} covered texels "
          f"({smap.skipped_triangles} degenerate UV triangles skipped)")
    return 0, run


def cmd_project_field(args):
    mesh = load_obj(args.mesh, flip_v=args.flip_v)
    run = _Run("project-field", args,
               [args.mesh, args.texture] if args.texture else [args.mesh])
    adjacency = build_adjacency(mesh)
    curv = principal_curvatures(mesh, radius_rings=args.rings,
                                adjacency=adjacency)
    field = build_uv_field(mesh, adjacency, curv, which=args.which)
    field = smooth_uv_field(field, adjacency, iterations=args.smooth)
    save_field_jsonl(field, run.track(f"{args.out}.jsonl"))
    texture = load_texture(args.texture) if args.texture else None
    from .report import save_field_overlay
    save_field_overlay(field, run.track(f"{args.out}_overlay.png"),
                       texture=texture)
    run.write_manifest(f"{args.out}.manifest.json")
    print(f"{field.num_valid}/{len(field)} valid anchors")
    return 0, run


def cmd_find_symmetry(args):
    mesh = load_obj(args.mesh, flip_v=args.flip_v)
    run = _Run("find-symmetry", args, [args.mesh])
    plane = estimate_symmetry_plane(mesh)
    max_residual = args.max_residual
    if max_residual is None:
        max_residual = 0.005 * mesh.bounding_box_diagonal()
    pairs = mirror_pairs(mesh, plane, max_residual=max_residual)
    save_plane_json(plane, run.track(f"{args.out}.plane.json"))
    save_pairs_jsonl(pairs, run.track(f"{args.out}.pairs.jsonl"))
    from .report import save_pairs_overlay
    save_pairs_overlay(pairs, run.track(f"{args.out}_overlay.png"))
    run.write_manifest(f"{args.out}.manifest.json")
    note = f" [{'; '.join(plane.warnings)}]" if plane.warnings else ""
    print(f"{len(pairs)} pairs, {pairs.rejected} rejected by residual filter"
          f"{note}")
    return 0, run


def _load_context(args):
    field = load_field_jsonl(args.field) if args.field else None
    pairs = load_pairs_jsonl(args.pairs) if args.pairs else None
    curv_unit = load_scalar_map(args.curv_unit) if args.curv_unit else None
    curv_signed = load_scalar_map(args.curv_signed) if args.curv_signed else None
    return RewardContext(field=field, curv_unit=curv_unit,
                         curv_signed=curv_signed, pairs=pairs)


def _context_from_mesh(mesh, width, height, rings=3, smooth=2):
    """Build every context input directly from a mesh (grad-check
    convenience)."""
    adjacency = build_adjacency(mesh)
    curv = principal_curvatures(mesh, radius_rings=rings, adjacency=adjacency)
    unit_vals = normalize_scalar_field(curv.mean_h, target="unit")
    signed_vals = normalize_scalar_field(curv.mean_h, target="signed_unit")
    curv_unit = bake_vertex_scalar(mesh, unit_vals, width, height,
                                   range_tag="unit")
    curv_signed = bake_vertex_scalar(mesh, signed_vals, width, height,
                                     range_tag="signed_unit")
    field = smooth_uv_field(build_uv_field(mesh, adjacency, curv),
                            adjacency, iterations=smooth)
    plane = estimate_symmetry_plane(mesh)
    pairs = mirror_pairs(mesh, plane)
    return RewardContext(field=field, curv_unit=curv_unit,
                         curv_signed=curv_signed, pairs=pairs)


def _aux_input_paths(args):
    return [getattr(args, name, None)
            for name in ("spec", "texture", "mesh", "field", "pairs")] + \
           [f"{args.curv_unit}.raw" if getattr(args, "curv_unit", None) else None,
            f"{args.curv_signed}.raw" if getattr(args, "curv_signed", None) else None]


def cmd_eval(args):
    with open(args.spec) as fh:
        spec = RewardSpec.from_json(fh.read())
    tex = load_texture(args.texture)
    context = _load_context(args)
    run = _Run("eval", args, _aux_input_paths(args))
    result = evaluate(spec, tex, context)
    write_result_json(result, spec, run.track(args.out))
    if args.grad_out:
        save_gradient_map(result.gradient, args.grad_out)
        run.track(f"{args.grad_out}.raw")
        run.track(f"{args.grad_out}.json")
    run.write_manifest(f"{args.out}.manifest.json")
    print(f"value {result.value:.9g}")
    return 0, run


def _grad_check_one(spec, tex, context, eps, corrupt_kind=None):
    """Analytic-vs-FD comparison per term and combined. Returns a list of
    (label, max_rel, max_abs, worst_texel, ok)."""
    from .imageops import Texture

    reports = []
    labels = [t.kind for t in spec.terms]
    singles = [RewardSpec(terms=(t,)) for t in spec.terms]
    todo = list(zip(labels, singles))
    if len(spec.terms) > 1:
        todo.append(("combined", spec))
    for label, sub in todo:
        analytic = evaluate(sub, tex, context).gradient.drgb.copy()
        if corrupt_kind is not None and label == corrupt_kind:
            analytic += 1e-3
        numeric = np.zeros_like(analytic)
        base = tex.rgb
        it = np.nditer(base, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            plus = base.copy()
            plus[idx] += eps
            minus = base.copy()
            minus[idx] -= eps
            vp = evaluate(sub, Texture(tex.width, tex.height, plus), context,
                          want_gradient=False).value
            vm = evaluate(sub, Texture(tex.width, tex.height, minus), context,
                          want_gradient=False).value
            numeric[idx] = (vp - vm) / (2 * eps)
            it.iternext()
        err = np.abs(analytic - numeric)
        big = np.abs(analytic) > 1e-8
        max_rel = float((err[big] / np.abs(analytic)[big]).max()) if big.any() else 0.0
        max_abs = float(err[~big].max()) if (~big).any() else 0.0
        rel_ok = max_rel < GRAD_REL_TOL
        abs_ok = max_abs < GRAD_ABS_TOL
        worst = np.unravel_index(int(np.argmax(err)), err.shape)
        reports.append((label, max_rel, max_abs, worst, rel_ok and abs_ok))
    return reports


def cmd_grad_check(args):
    with open(args.spec) as fh:
        spec = RewardSpec.from_json(fh.read())
    run = _Run("grad-check", args, _aux_input_paths(args))

    textures = []
    if args.texture:
        tex = load_texture(args.texture)
        textures.append(tex)
    size = (textures[0].width, textures[0].height) if textures else (8, 8)
    for trial in range(args.trials):
        rng = np.random.default_rng(1000 + trial)
        arr = rng.uniform(0.05, 0.95, size=(size[1], size[0], 3))
        from .imageops import texture_from_array
        textures.append(texture_from_array(arr))
    if not textures:
        raise ValueError("need --texture and/or --trials > 0")
    for tex in textures:
        if tex.width > GRAD_CHECK_MAX_SIDE or tex.height > GRAD_CHECK_MAX_SIDE:
            raise ValueError(
                f"grad-check limited to {GRAD_CHECK_MAX_SIDE}x"
                f"{GRAD_CHECK_MAX_SIDE} textures, got {tex.width}x{tex.height}")

    if args.mesh and not (args.field or args.pairs or args.curv_unit
                          or args.curv_signed):
        mesh = load_obj(args.mesh, flip_v=args.flip_v)
        context = _context_from_mesh(mesh, size[0], size[1])
    else:
        context = _load_context(args)

    all_ok = True
    for t_idx, tex in enumerate(textures):
        for label, max_rel, max_abs, worst, ok in _grad_check_one(
                spec, tex, context, args.eps, args.corrupt_term):
            status = "PASS" if ok else "FAIL"
            line = (f"texture {t_idx}: term {label}: max rel "
                    f"{max_rel:.3e} (tol {GRAD_REL_TOL:.0e}), max abs "
                    f"{max_abs:.3e} (tol {GRAD_ABS_TOL:.0e}): {status}")
            if not ok:
                line += f" worst texel (row,col,ch)={worst}"
                all_ok = False
            print(line)
    run.write_manifest(f"{args.out}.manifest.json" if args.out
                       else "grad_check.manifest.json")
    return (0 if all_ok else 1), run


def cmd_optimize(args):
    with open(args.spec) as fh:
        spec = RewardSpec.from_json(fh.read())
    context = _load_context(args)
    if args.init.startswith("noise:"):
        if not args.size:
            raise ValueError("--size is required with a noise init")
        w, h = _parse_size(args.size)
        seed = int(args.init.split(":", 1)[1])
        init = noise_texture(w, h, seed)
        init_path = None
    elif args.init.startswith("texture:"):
        init_path = args.init.split(":", 1)[1]
        init = load_texture(init_path)
        seed = 0
    else:
        raise ValueError("--init must be 'texture:PATH' or 'noise:SEED'")

    run = _Run("optimize", args, _aux_input_paths(args) + [init_path])
    os.makedirs(args.out, exist_ok=True)
    cfg = OptConfig(learning_rate=args.lr, steps=args.steps, clamp=True,
                    seed=seed, log_every=args.log_every)
    trace = optimize_texture(init, spec, context, cfg, keep_snapshots=True)

    term_kinds = [t.kind for t in spec.terms]
    write_trace_csv(trace, term_kinds,
                    run.track(os.path.join(args.out, "trace.csv")))
    from .report import save_trace_figure
    save_trace_figure(trace, term_kinds,
                      run.track(os.path.join(args.out, "trace.png")))
    for step, tex in trace.snapshots:
        save_texture(tex, run.track(
            os.path.join(args.out, f"snap_{step:06d}.png")))
    save_texture(trace.final,
                 run.track(os.path.join(args.out, "final.png")))
    run.write_manifest(os.path.join(args.out, "manifest.json"))
    first, last = trace.entries[0], trace.entries[-1]
    print(f"reward {first.value:.9g} -> {last.value:.9g} "
          f"over {args.steps} steps")
    return 0, run


def build_parser():
    parser = argparse.ArgumentParser(
        prog="texreward",
        description="Geometry-aware texture rewards, their exact texel "
                    "gradients, and a direct gradient-ascent optimizer.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--flip-v", action="store_true",
                       help="flip the OBJ vt v axis (assets authored with "
                            "a top-left UV origin)")

    p = sub.add_parser("bake-curvature",
                       help="bake normalized mean curvature into a UV raster")
    p.add_argument("mesh")
    p.add_argument("out", help="output base path (writes .raw/.json/.png)")
    p.add_argument("--size", default="64x64")
    p.add_argument("--range", choices=("unit", "signed_unit"), default="unit")
    p.add_argument("--rings", type=int, default=3)
    p.add_argument("--clip", type=float, default=0.02)
    p.add_argument("--dilate", action="store_true",
                   help="1-texel dilation on the PNG preview/figure only "
                        "(the raw export stays the exact bake)")
    add_common(p)
    p.set_defaults(func=cmd_bake_curvature)

    p = sub.add_parser("project-field",
                       help="project principal directions into a UV field")
    p.add_argument("mesh")
    p.add_argument("out", help="output base path (writes .jsonl + overlay)")
    p.add_argument("--which", choices=("min", "max"), default="min")
    p.add_argument("--smooth", type=int, default=3)
    p.add_argument("--rings", type=int, default=3)
    p.add_argument("--texture", default=None,
                   help="texture PNG for the overlay background")
    add_common(p)
    p.set_defaults(func=cmd_project_field)

    p = sub.add_parser("find-symmetry",
                       help="estimate the PCA symmetry plane and mirror pairs")
    p.add_argument("mesh")
    p.add_argument("out", help="output base path")
    p.add_argument("--max-residual", type=float, default=None,
                   help="pair filter distance (default 0.5%% of the bbox "
                        "diagonal)")
    add_common(p)
    p.set_defaults(func=cmd_find_symmetry)

    def add_aux(p):
        p.add_argument("--mesh", default=None)
        p.add_argument("--field", default=None, help="field JSONL path")
        p.add_argument("--pairs", default=None, help="pairs JSONL path")
        p.add_argument("--curv-unit", default=None,
                       help="unit-range ScalarMap base path")
        p.add_argument("--curv-signed", default=None,
                       help="signed-unit ScalarMap base path")

    p = sub.add_parser("eval", help="evaluate a reward spec on a texture")
    p.add_argument("--spec", required=True)
    p.add_argument("--texture", required=True)
    add_aux(p)
    p.add_argument("--out", required=True)
    p.add_argument("--grad-out", default=None,
                   help="also export the gradient raster to this base path")
    add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grad-check",
                       help="verify analytic gradients against finite "
                            "differences")
    p.add_argument("--spec", required=True)
    p.add_argument("--texture", default=None)
    add_aux(p)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--trials", type=int, default=0,
                   help="additional seeded random textures to check")
    p.add_argument("--out", default=None, help="manifest base path")
    p.add_argument("--corrupt-term", default=None, help=argparse.SUPPRESS)
    add_common(p)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("optimize",
                       help="gradient-ascent texture optimization")
    p.add_argument("--spec", required=True)
    p.add_argument("--init", required=True,
                   help="'texture:PATH' or 'noise:SEED'")
    p.add_argument("--size", default=None, help="WxH for noise inits")
    add_aux(p)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--log-every", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    add_common(p)
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None):
    global _ACTIVE_RUN
    parser = build_parser()
    args = parser.parse_args(argv)
    _ACTIVE_RUN = None
    try:
        code, _ = args.func(args)
        return code
    except (TexRewardError, ValueError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        if _ACTIVE_RUN is not None:
            _ACTIVE_RUN.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure: check-failure exit code
        if _ACTIVE_RUN is not None:
            _ACTIVE_RUN.cleanup()
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
