"""An elongated ellipsoid with a locally refined waist.

Stretching the sphere to semiaxes (1, 1, 3) and refining the band
|z| < 1 gives a mesh whose clusters vary in size and separation, which
is where adapting the block ranks pays off most. The adaptive run
reaches the same solution accuracy with fewer kernel entries and fewer
CG iterations than the fixed-tolerance sweep.
"""

from blockaca.experiments import RunConfig, compare, run
from blockaca.mesh import generate_icosphere, map_to_ellipsoid, refine_region

mesh = map_to_ellipsoid(generate_icosphere(2), (1.0, 1.0, 3.0))
refined = refine_region(mesh, lambda c: abs(c[2]) < 1.0, rounds=1)
print(f"ellipsoid: {len(mesh.triangles)} -> {len(refined.triangles)} panels "
      "after refining the waist")

base = dict(geometry="ellipsoid", level=2, semiaxes="1,1,3",
            refine_band=1.0, refine_rounds=1)
rows = {}
for pipeline, eps_key in (("aca", "eps_aca"), ("baca", "eps_baca")):
    config = RunConfig(pipeline=pipeline, **{eps_key: 1e-6},
                       out_dir=f"demo_out/ell_{pipeline}", **base)
    rows[pipeline] = run(config)
    print(f"{pipeline}: e_h={rows[pipeline]['e_h']:.4f} "
          f"storage={rows[pipeline]['storage_mb']:.2f} MB "
          f"entries={rows[pipeline]['entries_computed']} "
          f"cg={rows[pipeline]['cg_iterations']}")

ratios = compare("demo_out/ell_baca/results.csv",
                 "demo_out/ell_aca/results.csv")
print(f"adaptive / fixed: entries {ratios['entries_ratio']:.2f}, "
      f"storage {ratios['storage_ratio']:.2f}, "
      f"cg iterations {ratios['cg_iterations_ratio']:.2f}")
