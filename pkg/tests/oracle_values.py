"""Reference values frozen from ``tests/oracles/compute_oracles.py`` (mpmath, 40 digits)."""

BUMP_INTEGRAL = 0.44399381616807943782
BUMP_PSI0 = 0.82856883986910515166
BUMP_SECOND_MOMENT = 0.15811363626379823023

# phi_q(0) and the half-line integral of phi_q over [0, inf) for the n = 1, rho = 1 battery
PHI_Q_AT_0 = {0: 0.8285688398691051, 1: -3.1130466827453485, 2: 1.5688387740067777, 3: 25.911347237565145,
              4: 2.2778789550700704, 5: -110.37396380633085, 6: 2.9717226800641425, 7: 531.1926123349008,
              8: 3.65638863826427}
PHI_Q_HALF_LINE = {0: 1.5576380558093332, 1: 0.5, 2: -1.8236401935118003, 3: 0.5, 4: 8.024920916046268,
                   5: 0.5, 6: -26.304873126497938, 7: 0.5, 8: 100.09263793616427}

# exp(-1/(1 - 4 t^2)) on (-1/2, 1/2)
CLOSED_BUMP_MAX = 0.3678794411714423216
CLOSED_BUMP_DMAX = 1.5968595036671990883

# least-squares log-log slope of eps^2 + eps^5 on eps = 2^-10 .. 2^-36
EPS2_EPS5_SLOPE = 2.0000000000120530564

# sin^{(q+1)}(0.3) / (q+1)!
SIN_TAYLOR_LEAD = {0: 0.955336489125606, 1: -0.14776010333066977, 2: -0.15922274818760102,
                   3: 0.012313341944222482, 4: 0.00796113740938005}
