"""Independent double-precision oracles for frozen test values."""
import math

from fractions import Fraction


def linear_betas(T, b0, b1):
    if T == 1:
        return [b0]
    return [b0 + (b1 - b0) * i / (T - 1) for i in range(T)]


def alpha_bar_product(T, b0, b1):
    acc = 1.0
    for b in linear_betas(T, b0, b1):
        acc *= 1.0 - b
    return acc


def alpha_bar_exact(T, b0, b1):
    b0, b1 = Fraction(b0), Fraction(b1)
    acc = Fraction(1)
    for i in range(T):
        b = b0 + (b1 - b0) * i / (T - 1)
        acc *= 1 - b
    return float(acc)


if __name__ == "__main__":
    print("alpha_bar_1000 float  =", repr(alpha_bar_product(1000, 1e-4, 0.02)))
    print("alpha_bar_1000 exact  =", repr(alpha_bar_exact(1000, "0.0001", "0.02")))
    print("posterior_sigma T=2,t=2 =", repr(math.sqrt(0.2 * (1 - 0.9) / (1 - 0.72))))
    print("sqrt(0.72) =", repr(math.sqrt(0.72)))
    dim = 4
    print("embed dim4 t=10000 =", [f(10000 / 10000 ** (2 * k / dim)) for k in range(dim // 2) for f in (math.sin, math.cos)])
    L = 50375
    tr = math.floor(0.7 * L); va = math.floor(0.1 * L)
    print("split 50375 =", tr, va, L - tr - va)
    print("1/sqrt(3) =", repr(1 / math.sqrt(3)))
