"""Independent reference values for the analytics tests."""
import math


def euler(beta, gamma, n, s, i, r, dt, steps):
    out = [(s, i, r)]
    for _ in range(steps):
        inf = beta * s * i / n * dt
        rec = gamma * i * dt
        s, i, r = s - inf, i + inf - rec, r + rec
        out.append((s, i, r))
    return out


coarse = euler(0.3, 0.1, 1000.0, 990.0, 10.0, 0.0, 1.0, 160)
for t in (1, 10, 50, 100, 160):
    print("coarse t=%d S=%.17g I=%.17g R=%.17g" % ((t,) + coarse[t]))

fine = euler(0.3, 0.1, 1000.0, 990.0, 10.0, 0.0, 0.001, 160000)
dev = max(max(abs(a - b) for a, b in zip(coarse[t], fine[t * 1000])) for t in range(161))
print("max |coarse - fine| over compartments =", dev)

# SPRT step counts
p0, p1, a, b = 0.1, 0.3, 0.05, 0.05
up, lo = math.log((1 - b) / a), math.log(b / (1 - a))
llr, n = 0.0, 0
while llr < up:
    llr += math.log(p1 / p0); n += 1
print("sprt all-positive steps:", n, "llr", repr(llr))
llr, n = 0.0, 0
while llr > lo:
    llr += math.log((1 - p1) / (1 - p0)); n += 1
print("sprt all-negative steps:", n, "llr", repr(llr))

# pooled two-proportion z
x1, n1, x2, n2 = 50, 100, 10, 100
pp = (x1 + x2) / (n1 + n2)
z = (x1 / n1 - x2 / n2) / math.sqrt(pp * (1 - pp) * (1 / n1 + 1 / n2))
print("z =", repr(z))


def lof(points, k):
    n = len(points)
    d = [[math.dist(points[i], points[j]) for j in range(n)] for i in range(n)]
    kd, nb = [], []
    for i in range(n):
        ds = sorted(d[i][j] for j in range(n) if j != i)
        kd.append(ds[k - 1])
        nb.append([j for j in range(n) if j != i and d[i][j] <= ds[k - 1]])
    lrd = [1.0 / (sum(max(kd[o], d[i][o]) for o in nb[i]) / len(nb[i])) for i in range(n)]
    return [sum(lrd[o] for o in nb[i]) / len(nb[i]) / lrd[i] for i in range(n)]


grid = [(x, y) for x in range(6) for y in range(6)]
sc = lof(grid, 4)
print("grid 6x6 k=4 LOF min=%.6f max=%.6f" % (min(sc), max(sc)))
sc = lof(grid + [(20, 20)], 4)
print("grid+outlier: outlier=%.6f max inlier=%.6f" % (sc[-1], max(sc[:-1])))
