"""Quick end-to-end check of the pyxyqaoa extension module."""
import math

import pyxyqaoa as xq


def main():
    s = xq.Schedule.parse("0.3;0.7")
    assert s.depth == 1 and math.isclose(s.total_time, 1.0)
    f = xq.fidelity(s, 2)
    assert abs(f - math.sin(0.6) ** 2) < 1e-12, f

    amps = xq.final_amplitudes(xq.Schedule([(0.4, 0.1), (0.2, 0.3)]), 5)
    assert abs(sum(abs(a) ** 2 for a in amps) - 1.0) < 1e-12

    grad = xq.fidelity_gradient(xq.Schedule.from_flat([0.4, 0.1, 0.2, 0.3]), 4)
    assert len(grad) == 4

    res = xq.optimize(3, 2, restarts=8, seed=1)
    assert res.best_fidelity > 0.999, res
    report = xq.verify_pontryagin(res.best_schedule, 3)
    assert report.verdict in ("consistent", "violated", "vacuous")

    assert math.isclose(
        xq.grover_ansatz_fidelity(6, 5, 0.1), xq.partition_sum_fidelity(6, 5, 0.1), abs_tol=1e-10
    )
    assert xq.lr_region(20, 0.0) == "suppressed"
    assert xq.lr_success_bound(20, 10.0) == 1.0

    params, r2 = xq.fit("linear", [0, 1, 2, 3], [1, 3, 5, 7])
    assert abs(params[0] - 2) < 1e-12 and r2 > 0.999999

    try:
        xq.Schedule.parse("not a schedule")
    except xq.XyqaoaError:
        pass
    else:
        raise AssertionError("expected XyqaoaError")
    print("pyxyqaoa smoke test OK:", res)


if __name__ == "__main__":
    main()
