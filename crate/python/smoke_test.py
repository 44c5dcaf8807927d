"""Smoke test for the `infoprice` extension module.

Build and import either with `maturin develop -m crates/py/Cargo.toml`, or:

    cargo build --release -p infoprice-py --features extension-module
    cp target/release/libinfoprice.so python/infoprice.so
    python python/smoke_test.py
"""

import math

import infoprice as ip


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    flat = ip.DiscountCurve.flat(0.0)
    sched = ip.FlowSchedule.constant(1.0, 1.0)
    expo = ip.Prior.exponential(1.0)

    # nothing learned yet: the price is the prior mean
    assert close(ip.price_single(expo, sched, flat, 0.0, 0.0), 1.0, 1e-12)

    for t in (0.2, 0.5, 0.8):
        for xi in (-0.5, 0.0, 0.7):
            q = ip.price_single(expo, sched, flat, t, xi)
            c = ip.closed_form_exponential(1.0, 1.0, flat, t, 1.0, xi)
            assert close(q, c, 1e-8), (t, xi, q, c)
            g = ip.closed_form_gamma(1, 1.0, 1.0, flat, t, 1.0, xi)
            assert close(g, c, 1e-10)

    # F_0(x) = sqrt(pi/2) erfc(x/sqrt(2))
    assert close(ip.f_k(0, 0.3), math.sqrt(math.pi / 2) * math.erfc(0.3 / math.sqrt(2)), 1e-12)

    r, vol, T = 0.03, 0.25, 2.0
    s = ip.price_gbm_factor(100.0, r, vol, 1 / math.sqrt(T), T, 0.5, 0.3)
    assert close(s, 100.0 * math.exp(r * 0.5 + vol * 0.3 - 0.5 * vol**2 * 0.5), 1e-12)

    curve = ip.DiscountCurve.flat(0.03)
    opt = ip.CallOption(0.9, 0.5, expo, sched, curve)
    call, put = opt.call(), opt.put()
    assert close(call - put, opt.forward(), 1e-10)
    kind, y = opt.critical_value()
    assert kind == "root" and math.isfinite(y)
    mc, se = opt.monte_carlo(20000, 7)
    assert abs(mc - call) <= 4 * se, (mc, call, se)

    path = ip.simulate_information_path(expo, sched, 0.5, 32, seed=11)
    assert len(path["t"]) == len(path["xi"]) == len(path["mean"]) == 33
    assert path["xi"][0] == 0.0 and close(path["mean"][0], 1.0, 1e-12)
    again = ip.simulate_information_path(expo, sched, 0.5, 32, seed=11)
    assert again["xi"] == path["xi"]

    try:
        ip.Prior.exponential(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative mean accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
