"""Command-line entry point: ``vemstokes {run,mesh,solve,estimate}``."""

import argparse
import logging
import sys

from . import bench
from .estimator import effectivity, global_estimate
from .io import eigenfunction_fields, read_mesh, write_mesh, write_vtk
from .polymesh import DOMAINS, FAMILIES, generate, quality
from .system import Config, assemble, solve_eigs


def _csv(cast):
    def parse(text):
        try:
            return tuple(cast(t) for t in text.split(",") if t.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def _fraction(text):
    if "/" in text:
        a, b = text.split("/")
        return float(a) / float(b)
    return float(text)


def _on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _mesh_args(p):
    p.add_argument("--mesh", help="mesh file written by 'vemstokes mesh'")
    p.add_argument("--domain", default="square", choices=DOMAINS)
    p.add_argument("--family", default="t1", type=str.upper, choices=FAMILIES)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--seed", type=int, default=42)


def _problem_args(p):
    _mesh_args(p)
    p.add_argument("--alpha", type=_fraction, default=1.0)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--bc", default="clamped", choices=("clamped", "mixed"))
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--vtk", help="write the lowest eigenpair to this VTK file")


def _load_mesh(args):
    if args.mesh:
        return read_mesh(args.mesh)
    return generate(args.domain, args.family, args.N, seed=args.seed)


def _solve(args):
    mesh = _load_mesh(args)
    _, system = assemble(mesh, Config(nu=args.nu, alpha=args.alpha, bc=args.bc))
    return mesh, system, solve_eigs(system, args.k)


def cmd_run(args):
    spec = bench.ExperimentSpec(
        test=f"test{args.test}", families=args.family, N=args.N, alpha=args.alpha,
        bc=args.bc, k=args.k, seed=args.seed, nu=args.nu, steps=args.steps,
        jump_nu=args.jump_nu, out=args.out)
    for path in bench.run(spec):
        print(path)


def cmd_mesh(args):
    mesh = _load_mesh(args)
    write_mesh(args.out, mesh)
    q = quality(mesh)
    print(f"{mesh.n_cells} cells, {mesh.n_vertices} vertices, {mesh.n_edges} edges")
    print(f"min kernel radius / h = {q.min_kernel_ratio:.4f}, "
          f"min vertex spacing / h = {q.min_vertex_ratio:.4f}")
    if args.vtk:
        write_vtk(args.vtk, mesh, cell_scalars={"area": mesh.areas})


def cmd_solve(args):
    mesh, system, sol = _solve(args)
    for i, (lam, res) in enumerate(zip(sol.eigenvalues, sol.residuals)):
        print(f"lambda_{i + 1} = {lam:.10g}  (residual {res:.1e})")
    if args.vtk:
        vel, p, pi0 = eigenfunction_fields(mesh, system, sol)
        write_vtk(args.vtk, mesh, point_vectors={"velocity": vel},
                  cell_scalars={"pressure": p}, cell_vectors={"pi0_velocity": pi0})


def cmd_estimate(args):
    args.k = max(args.k, 1)
    mesh, system, sol = _solve(args)
    ind = global_estimate(mesh, system, sol, 0, args.jump_nu)
    th2, r2, j2, eta2 = ind.totals()
    lam = sol.eigenvalues[0]
    print(f"lambda_1 = {lam:.10g}")
    print(f"theta2 = {th2:.6e}  R2 = {r2:.6e}  J2 = {j2:.6e}  eta2 = {eta2:.6e}")
    if args.ref is not None:
        print(f"err = {abs(args.ref - lam) / args.ref:.6e}  eff = {effectivity(args.ref, lam, eta2):.6e}")
    if args.vtk:
        vel, p, pi0 = eigenfunction_fields(mesh, system, sol)
        write_vtk(args.vtk, mesh, point_vectors={"velocity": vel},
                  cell_scalars={"pressure": p, "eta2": ind.eta2_cells},
                  cell_vectors={"pi0_velocity": pi0})


def build_parser():
    ap = argparse.ArgumentParser(prog="vemstokes", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="reproduce one of the numerical tests")
    p.add_argument("--test", required=True, choices=("1", "2", "3-sweep", "3-order", "4"))
    p.add_argument("--family", type=_csv(str.upper), default=())
    p.add_argument("--N", type=_csv(int), default=())
    p.add_argument("--alpha", type=_csv(_fraction), default=())
    p.add_argument("--bc", default="", choices=("", "clamped", "mixed"))
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--steps", type=int, default=12)
    p.add_argument("--jump-nu", type=_on_off, default=True, metavar="{on,off}")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("mesh", help="generate a mesh and write it to a file")
    _mesh_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--vtk")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", help="print the lowest eigenvalues")
    _problem_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("estimate", help="evaluate the error estimator for the lowest eigenpair")
    _problem_args(p)
    p.add_argument("--ref", type=float, help="reference eigenvalue for err and effectivity")
    p.add_argument("--jump-nu", type=_on_off, default=True, metavar="{on,off}")
    p.set_defaults(func=cmd_estimate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, RuntimeError) as exc:
        print(f"vemstokes: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
