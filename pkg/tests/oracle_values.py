"""Reference values computed independently before the build and frozen here.

Each value was produced with mpmath at 30 significant digits (adaptive
quadrature on the exact integrands, root finding on the exact derivative),
without using any code from the package.
"""

PHI_1 = 0.841344746068542948585

# h2 under U[50,150]: root of a^2 - 403 a + 20200 = 0 with a = x - 50
H2_UNIFORM_XSTAR = 108.663555070843351657
H2_UNIFORM_HSTAR = 1178.12344296075847557
H2_UNIFORM_HPRIME_105 = -10.6

# h2 under N(100, 100)
H2_NORMAL_XSTAR = 102.820321432031391211
H2_NORMAL_HSTAR = 150.162236681471195934
H2_NORMAL_HPRIME_105 = 6.11845623579591871904

# mean of the optimal below-side density (3/2) z^(1/2) on [0, 1]
OPTIMAL_H1_U01_MEAN = 0.6
