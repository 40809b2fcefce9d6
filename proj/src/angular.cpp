#include "orca/angular.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace orca {

namespace {

// doubled representation keeps half-integers exact
int doubled(double j) {
    double t = 2.0 * j;
    double r = std::round(t);
    if (std::abs(t - r) > 1e-9)
        throw std::domain_error("angular momentum must be a half-integer");
    return static_cast<int>(r);
}

constexpr int kMaxFact = 200;

double log_fact(int n) {
    static const auto table = [] {
        std::array<double, kMaxFact + 1> t{};
        t[0] = 0.0;
        for (int i = 1; i <= kMaxFact; ++i) t[i] = t[i - 1] + std::log(double(i));
        return t;
    }();
    if (n < 0 || n > kMaxFact) throw std::domain_error("factorial out of range");
    return table[n];
}

bool triangle_ok(int a2, int b2, int c2) {
    return c2 >= std::abs(a2 - b2) && c2 <= a2 + b2 && (a2 + b2 + c2) % 2 == 0;
}

// log of sqrt of the triangle coefficient Delta(abc)
double log_delta(int a2, int b2, int c2) {
    return 0.5 * (log_fact((a2 + b2 - c2) / 2) + log_fact((a2 - b2 + c2) / 2) +
                  log_fact((-a2 + b2 + c2) / 2) - log_fact((a2 + b2 + c2) / 2 + 1));
}

} // namespace

double wigner_3j(double j1, double j2, double j3,
                 double m1, double m2, double m3) {
    int a2 = doubled(j1), b2 = doubled(j2), c2 = doubled(j3);
    int x2 = doubled(m1), y2 = doubled(m2), z2 = doubled(m3);
    if (x2 + y2 + z2 != 0) return 0.0;
    if (!triangle_ok(a2, b2, c2)) return 0.0;
    if (std::abs(x2) > a2 || std::abs(y2) > b2 || std::abs(z2) > c2) return 0.0;
    if ((a2 + x2) % 2 || (b2 + y2) % 2 || (c2 + z2) % 2) return 0.0;

    double pref = log_delta(a2, b2, c2) +
                  0.5 * (log_fact((a2 + x2) / 2) + log_fact((a2 - x2) / 2) +
                         log_fact((b2 + y2) / 2) + log_fact((b2 - y2) / 2) +
                         log_fact((c2 + z2) / 2) + log_fact((c2 - z2) / 2));

    int kmin = std::max({0, (b2 - c2 - x2) / 2, (a2 - c2 + y2) / 2});
    int kmax = std::min({(a2 + b2 - c2) / 2, (a2 - x2) / 2, (b2 + y2) / 2});
    double sum = 0.0;
    for (int k = kmin; k <= kmax; ++k) {
        double lg = log_fact(k) + log_fact((a2 + b2 - c2) / 2 - k) +
                    log_fact((a2 - x2) / 2 - k) + log_fact((b2 + y2) / 2 - k) +
                    log_fact((c2 - b2 + x2) / 2 + k) + log_fact((c2 - a2 - y2) / 2 + k);
        sum += ((k % 2) ? -1.0 : 1.0) * std::exp(pref - lg);
    }
    int phase = ((a2 - b2 - z2) / 2) % 2 ? -1 : 1;
    return phase * sum;
}

double wigner_6j(double j1, double j2, double j3,
                 double j4, double j5, double j6) {
    int a2 = doubled(j1), b2 = doubled(j2), c2 = doubled(j3);
    int d2 = doubled(j4), e2 = doubled(j5), f2 = doubled(j6);
    if (!triangle_ok(a2, b2, c2) || !triangle_ok(a2, e2, f2) ||
        !triangle_ok(d2, b2, f2) || !triangle_ok(d2, e2, c2))
        return 0.0;

    double pref = log_delta(a2, b2, c2) + log_delta(a2, e2, f2) +
                  log_delta(d2, b2, f2) + log_delta(d2, e2, c2);

    int abc = (a2 + b2 + c2) / 2, aef = (a2 + e2 + f2) / 2;
    int dbf = (d2 + b2 + f2) / 2, dec = (d2 + e2 + c2) / 2;
    int abde = (a2 + b2 + d2 + e2) / 2;
    int bcef = (b2 + c2 + e2 + f2) / 2;
    int acdf = (a2 + c2 + d2 + f2) / 2;

    int kmin = std::max({abc, aef, dbf, dec});
    int kmax = std::min({abde, bcef, acdf});
    double sum = 0.0;
    for (int k = kmin; k <= kmax; ++k) {
        double lg = log_fact(k - abc) + log_fact(k - aef) + log_fact(k - dbf) +
                    log_fact(k - dec) + log_fact(abde - k) + log_fact(bcef - k) +
                    log_fact(acdf - k) - log_fact(k + 1);
        sum += ((k % 2) ? -1.0 : 1.0) * std::exp(pref - lg);
    }
    return sum;
}

double clebsch_gordan(double j1, double m1, double j2, double m2,
                      double J, double M) {
    int phase2 = doubled(j1) - doubled(j2) + doubled(M);
    double sign = (((phase2 / 2) % 2) != 0) ? -1.0 : 1.0;
    return sign * std::sqrt(2.0 * J + 1.0) * wigner_3j(j1, j2, J, m1, m2, -M);
}

} // namespace orca
