"""Independent reference values, computed with mpmath only.

Nothing from hawkes_stability is imported here.  The printed numbers are
frozen into the test-suite; rerun this script to regenerate them.
"""

import mpmath as mp

mp.mp.dps = 30


def powerlaw(p):
    return lambda t: p * (1 + t) ** (-(p + 1))


def main():
    out = {}
    out["powerlaw1_at_1"] = powerlaw(1)(1)
    out["powerlaw2_H_at_1"] = mp.quad(powerlaw(2), [1, mp.inf])
    out["exp1_H_at_2"] = mp.quad(lambda t: mp.e ** (-t), [2, mp.inf])
    out["exp1_first_moment"] = mp.quad(lambda t: t * mp.e ** (-t), [0, mp.inf])
    out["powerlaw2_first_moment"] = mp.quad(lambda t: t * powerlaw(2)(t), [0, mp.inf])
    # partial integrals of t^(1/2) (1+t)^(-3/2) * 0.5 keep growing like log
    out["powerlaw05_first_moment_partials"] = [mp.quad(lambda t: t * powerlaw(0.5)(t), [0, 10 ** k]) for k in (2, 4, 6)]
    out["hyp2_C_exp_identity"] = mp.quad(lambda s: mp.e ** (-s), [0, mp.inf])
    out["hyp2_C_powerlaw2_identity"] = mp.quad(lambda s: (1 + s) ** -2, [0, mp.inf])
    out["hyp2_C_sqrt_powerlaw1_partials"] = [mp.quad(lambda s: (1 + s) ** -0.5, [0, 10 ** k]) for k in (2, 4, 6)]
    # sqrt(z) <= 0.25 + z: minimum of 1.25 + z - (1 + sqrt z)
    out["sqrtcap_envelope_margin"] = mp.findroot(lambda z: 1 - 1 / (2 * mp.sqrt(z)), 0.3)
    z = out["sqrtcap_envelope_margin"]
    out["sqrtcap_min_gap"] = 1.25 + z - (1 + mp.sqrt(z))
    # events at 0 and 0.5, exponential(1) kernel, now=1, s=1
    out["impulse_two_events"] = mp.e ** -2 + mp.e ** -1.5
    # d_X with |g - f| = 1: I_n = n
    out["dX_unit_gap_n20"] = mp.fsum(mp.mpf(2) ** -n * n / (1 + n) for n in range(1, 21))
    out["dX_unit_gap_inf"] = mp.nsum(lambda n: 2 ** -n * n / (1 + n), [1, mp.inf])
    # linear Hawkes, exponential(1), A=1, B=0.5, g0=0: E N(T) = 2T - 2(1 - e^{-T/2})
    T = 20
    out["mean_count_T20"] = 2 * T - 2 * (1 - mp.e ** (-T / 2))
    # 2x2 example matrix of the two-type config
    M = mp.matrix([[0.3, 0.4], [0.2, 0.1]])
    out["spectral_2x2"] = max(abs(v) for v in mp.eig(M)[0])
    for k, v in out.items():
        if isinstance(v, list):
            print(k, [mp.nstr(x, 17) for x in v])
        else:
            print(k, mp.nstr(v, 17))


if __name__ == "__main__":
    main()
