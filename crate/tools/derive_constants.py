"""Extended-precision values frozen in crates/core/tests/regression.rs."""
from mpmath import mp, mpf, exp, sqrt, besseli, log, pi, matrix, factorial, inverse

mp.dps = 50

ED, PD, ETA_D = mpf("0.015"), mpf("6.02e-6"), mpf("0.145")


def gains_x(mu_a, mu_b, eta_a=ETA_D, eta_b=ETA_D):
    a = sqrt(eta_a * mu_a * eta_b * mu_b) / 2
    b = (1 - PD) * exp(-(eta_a * mu_a + eta_b * mu_b) / 4)
    q = 2 * b**2 * (1 + 2 * b**2 - 4 * b * besseli(0, a) + besseli(0, 2 * a))
    qe = q / 2 - 2 * (mpf(1) / 2 - ED) * b**2 * (besseli(0, 2 * a) - 1)
    return q, qe


def gains_z(mu_a, mu_b, eta_a=ETA_D, eta_b=ETA_D):
    xa, xb = eta_a * mu_a, eta_b * mu_b
    a = sqrt(xa * xb) / 2
    common = exp(-(xa + xb) / 2)
    keep = (1 - PD) ** 2
    qc = 2 * keep * common * (1 - (1 - PD) * exp(-xa / 2)) * (1 - (1 - PD) * exp(-xb / 2))
    qe_ = 2 * PD * keep * common * (besseli(0, 2 * a) - (1 - PD) * common)
    return qc + qe_, ED * qc + (1 - ED) * qe_


def h2(x):
    return -x * log(x, 2) - (1 - x) * log(1 - x, 2)


def gamma_bar(a, b, c, d):
    return sqrt((c + d) * (1 - b) * b / (c * d) * log((c + d) / (2 * pi * c * d * (1 - b) * b * a**2)))


def moment_inverse(mu):
    """Returns N with N[a, i] = (M^-1)_{i, a}, i.e. the coefficients that map
    gains at intensity i back to the a-photon moment."""
    k = len(mu)
    m = matrix(k, k)
    for a in range(k):
        for i in range(k):
            m[a, i] = mu[i] ** a / factorial(a)
    return inverse(m).T


def show(name, v):
    print(f"{name} = {mp.nstr(v, 20)}")


q, qe = gains_x(mpf("0.1"), mpf("0.1"))
show("QX", q); show("QEX", qe)
q, qe = gains_z(mpf("0.1"), mpf("0.1"))
show("QZ", q); show("QEZ", qe)
show("gamma_bar", gamma_bar(mpf("1e-10"), mpf("0.02"), mpf("1e6"), mpf("1e6")))

# k = 3 inverse rows
inv = moment_inverse([mpf("0.6"), mpf("0.2"), mpf("0.01")])
for a in range(3):
    print("inv3 row", a, [mp.nstr(inv[a, i], 20) for i in range(3)])

# k = 4 coefficient sets: even set = all, odd set drops the largest
mu4 = [mpf("0.5"), mpf("0.2"), mpf("0.05"), mpf("1e-6")]
inv = moment_inverse(mu4)
print("a_even0", [mp.nstr(exp(mu4[i]) * inv[0, i], 20) for i in range(4)])
print("a_even1", [mp.nstr(-exp(mu4[i]) * inv[1, i], 20) for i in range(4)])
sub = mu4[1:]
inv_s = moment_inverse(sub)
print("a_odd", ["0"] + [mp.nstr(exp(sub[i]) * inv_s[1, i], 20) for i in range(3)])
# tail constant on the odd subset S (size n):
# e_{n-1}(S) sum_i [e^mu_i - sum_{j<n} mu_i^j/j!] / (mu_i prod_{t != i}(mu_i - mu_t))
def c_tail(sub):
    n = len(sub)
    total = 0
    for i, m in enumerate(sub):
        den = m
        for t, o in enumerate(sub):
            if t != i:
                den *= m - o
        total += (exp(m) - sum(m**j / factorial(j) for j in range(n))) / den
    from itertools import combinations
    e = 0
    for c in combinations(sub, n - 1):
        term = 1
        for m in c:
            term *= m
        e += term
    return e * total
show("c_tail_odd_k4", c_tail(sub))

# Lambda_EC for Z ladder (0.3, 1e-6), p = (0.9, 0.1), f_EC = 1.16
mz, pz = [mpf("0.3"), mpf("1e-6")], [mpf("0.9"), mpf("0.1")]
lam = 0
for i in range(2):
    for j in range(2):
        q, qe = gains_z(mz[i], mz[j])
        lam += pz[i] * pz[j] * q * h2(qe / q)
show("lambda_ec", mpf("1.16") * lam)
