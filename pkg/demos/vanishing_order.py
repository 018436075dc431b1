"""Vanishing order of a harmonic function at the horn vertex.

Solves the Dirichlet problem with boundary data Y_1,0 on the positive-K
preset, prints log q(r) against the quasi-polynomial fit and compares with a
flat-space linear field, whose order is exactly 1.
"""

import numpy as np

from hornlab import curvature, decay, harmonic, profiles


def main():
    params = profiles.preset("positive-k")
    metric = curvature.horn_metric(params)
    s = decay.default_ball_radius(metric)
    horn = harmonic.dirichlet_solve(metric, s, {1: {0: 1.0}}, r_start=1e-15 * s)
    report = decay.decay_report(horn)
    fit = decay.quasipoly_fit(report)
    print(f"ball radius s = {s:.6g}, eps = {params.epsilon}")
    print(f"fit log q = {fit.A:.3f} {fit.B:+.3f} log r {fit.c:+.4f} (log r)^2  -> {fit.verdict}")
    print(f"{'r / s':>10} {'log q':>12} {'fit':>12}")
    lr = np.log(report.r_grid)
    model = fit.A + fit.B * lr + fit.c * lr**2
    for i in range(0, report.r_grid.size, 6):
        print(f"{report.r_grid[i] / s:10.2e} {report.log_q[i]:12.4f} {model[i]:12.4f}")
    cert = decay.decay_certificate(report, params.epsilon)
    print(f"Gaussian-in-log certificate holds: {cert.holds} (C = {cert.C:.3g})")

    flat = harmonic.dirichlet_solve(curvature.flat_metric(), 1.0, {1: {0: 1.0}})
    print("flat linear field:", decay.quasipoly_fit(decay.decay_report(flat)).verdict)


if __name__ == "__main__":
    main()
