#pragma once

// Wigner 3j/6j symbols and Clebsch-Gordan coefficients, Racah's closed forms
// with log-factorials (Racah, Phys. Rev. 62, 438 (1942)). Arguments are the
// usual (half-)integer angular momenta passed as doubles; selection-rule
// violations return 0, non-half-integer input throws.

namespace orca {

double wigner_3j(double j1, double j2, double j3,
                 double m1, double m2, double m3);

double wigner_6j(double j1, double j2, double j3,
                 double j4, double j5, double j6);

double clebsch_gordan(double j1, double m1, double j2, double m2,
                      double J, double M);

} // namespace orca
