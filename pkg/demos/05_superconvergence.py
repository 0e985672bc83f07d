"""Convergence rates with local post-processing.

The hybridized mixed method of order k delivers p and u at rate k; a
cell-local solve lifts the scalar to rate k+1.  The LDG-H method with
tau = 1 delivers rate k+1 for both fields and k+2 for the post-
processed scalar.
"""

from hybridfem.study import StudySpec, run_convergence


def show(spec: StudySpec, note: str) -> None:
    rows = run_convergence(spec)
    print(f"\n{spec.method}, k={spec.degree} ({note})")
    print(f"{'n':>4} {'err_p':>12} {'rate':>6} {'err_u':>12} {'rate':>6} "
          f"{'err_p*':>12} {'rate':>6}")
    for row in rows:
        def fmt(v, r):
            if row[v] is None:
                return f"{'--':>12} {'--':>6}"
            rs = f"{row[r]:.2f}" if row[r] is not None else "--"
            return f"{row[v]:.4e} {rs:>6}"
        print(f"{row['n']:>4} {fmt('err_p', 'rate_p')} "
              f"{fmt('err_u', 'rate_u')} {fmt('err_pstar', 'rate_pstar')}")


for k in (1, 2):
    show(StudySpec(method="mixed-hybrid", degree=k, sizes=(4, 8, 16, 32),
                   inner_pc="exact"),
         f"expect rates {k}, {k}, {k + 1}")

for k in (1, 2):
    show(StudySpec(method="ldgh", degree=k, tau=1.0, sizes=(4, 8, 16),
                   inner_pc="exact"),
         f"expect rates {k + 1}, {k + 1}, {k + 2}")

show(StudySpec(method="cg-primal", degree=2, sizes=(4, 8, 16),
               inner_pc="jacobi", rtol=1e-10),
     "primal reference, expect scalar rate 3")
