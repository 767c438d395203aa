"""High-precision reference values, computed once with 40-digit arithmetic
(direct summation of the flow-balance weights, and nested quadrature of the
density formula) and frozen here."""

# (n, R): delta, zeta, E Xs, E Xs^2, pi_n, pi_0
CHAIN = {
    (500, 488.94): (0.045224337748974421891, -0.50018117550365710612, 1.0187220664953994058,
                    5.629028892484342646, 0.01127114868817378156, 3.240355208629764779e-213),
    (5, 4.0): (0.5, -0.5, 1.1082251082251082251, 6.5411255411255411255, 0.11082251082251082251,
               0.012987012987012987013),
    (2, 1.0): (1.0, -1.0, 1.0 / 3.0, 7.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0),
    (50, 46.59): (0.14650540413463423001, -0.49958342809910272432, 1.0428006250568407165,
                  5.8484224475972262522, 0.035529875136323238987, 4.1594224476720342418e-21),
}

# (n, R): E Y, E Y^2, nu(0), {x: P(Y <= x)}
NU = {
    (5, 4.0): (1.12016244138494685, 6.60111290789990613, 0.279394014372267773,
               {-1.5: 0.0342711808843245326, 0.25: 0.442450830837234072, 1.0: 0.601352904817985087,
                3.0: 0.836111279595685084}),
    (5, 3.0): (0.213855837813453015, 1.74205785368745089, 0.369857302938522857,
               {-1.5: 0.0417869394867087393, 0.25: 0.590829518042610579, 1.0: 0.787842803456271616,
                3.0: 0.962535834653149845}),
}
