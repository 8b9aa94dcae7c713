"""Write the packaged POVM fixtures (two-copy phase-dephasing measurements).

The phase-optimal measurement is exact.  The five weighted measurements are
given to four digits; their vectors are Loewdin-orthonormalised so the
elements sum to the identity to machine precision.
"""

from pathlib import Path

import numpy as np

from priorest.fisher import Povm, save_povm

OUT = Path(__file__).resolve().parents[1] / "src" / "priorest" / "data"
S = 1 / np.sqrt(2)

PHI_VECTORS = [
    [0.5, -0.5j, -0.5j, -0.5],
    [0.5, 0.5j, 0.5j, -0.5],
    [0, -S, S, 0],
    [S, 0, 0, S],
]
PHI_ESTIMATOR = [[-2, 2, 0, 0], [0, 0, 2.5, -1.5]]

# w: (psi_1 entries, psi_3 entries, estimator rows); psi_4 is the conjugate of psi_1, psi_2 the singlet
WEIGHTED = {
    1.8: ((0.5033, -0.0569 + 0.4934j, -0.4901 - 0.1145j), (0.7024, 0.0815),
          [[2.1375, 0, 0, -2.1375], [0.3581, 1.8459, -1.3648, 0.3581]]),
    1.4: ((0.5135, -0.1109 + 0.4733j, -0.4601 - 0.2282j), (0.6874, 0.1657),
          [[2.3392, 0, 0, -2.3392], [0.5882, 1.3291, -1.1170, 0.5882]]),
    1.0: ((0.5245, -0.1434 + 0.4520j, -0.4287 - 0.3023j), (0.6706, 0.2243),
          [[2.5323, 0, 0, -2.5323], [0.6897, 1.0688, -0.9538, 0.6897]]),
    0.6: ((0.5382, -0.1697 + 0.4260j, -0.3907 - 0.3701j), (0.6486, 0.2817),
          [[2.7856, 0, 0, -2.7856], [0.7582, 0.8777, -0.8181, 0.7582]]),
    0.2: ((0.5620, -0.1960 + 0.3817j, -0.3276 - 0.4567j), (0.6068, 0.3630),
          [[3.3250, 0, 0, -3.3250], [0.8193, 0.6937, -0.6743, 0.8193]]),
}


def loewdin(vectors):
    v = np.asarray(vectors, dtype=complex).T  # columns
    w, u = np.linalg.eigh(v.conj().T @ v)
    return (v @ u @ np.diag(w ** -0.5) @ u.conj().T).T


def weighted_vectors(psi1, psi3):
    a, b, c = psi1
    p1 = [a, b, b, c]
    p4 = np.conj(p1)
    p3 = [psi3[0], psi3[1], psi3[1], psi3[0]]
    return [p1, [0, S, -S, 0], p3, p4]


def main():
    OUT.mkdir(exist_ok=True)
    save_povm(Povm.from_vectors(PHI_VECTORS, estimator=PHI_ESTIMATOR, offset=[0.0, 0.5]),
              OUT / "two_copy_phi.json")
    for w, (psi1, psi3, est) in WEIGHTED.items():
        vecs = loewdin(weighted_vectors(psi1, psi3))
        save_povm(Povm.from_vectors(vecs, estimator=est, offset=[0.0, 0.5]),
                  OUT / f"two_copy_w{w:.1f}.json")


if __name__ == "__main__":
    main()
