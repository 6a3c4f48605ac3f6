#include "nestmlmc/math.hpp"

#include <limits>
#include <stdexcept>

namespace nestmlmc {

double norm_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        if (u == 0.0) return -std::numeric_limits<double>::infinity();
        if (u == 1.0) return std::numeric_limits<double>::infinity();
        throw std::domain_error("norm_quantile: u outside [0,1]");
    }
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (u < plow) {
        double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (u <= 1.0 - plow) {
        double q = u - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley step against the full-precision CDF.
    double e = norm_cdf(x) - u;
    double v = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(0.5 * x * x);
    x = x - v / (1.0 + 0.5 * x * v);
    return x;
}

LineFit ols_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> w) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("ols_line: need matching x/y with >= 2 points");
    std::vector<double> wt(x.size(), 1.0);
    if (!w.empty()) {
        if (w.size() != x.size()) throw std::invalid_argument("ols_line: weight size mismatch");
        wt.assign(w.begin(), w.end());
    }
    double sw = 0, sx = 0, sy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sw += wt[i];
        sx += wt[i] * x[i];
        sy += wt[i] * y[i];
    }
    double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += wt[i] * dx * dx;
        sxy += wt[i] * dx * dy;
        syy += wt[i] * dy * dy;
    }
    if (sxx <= 0.0) throw std::invalid_argument("ols_line: degenerate abscissae");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

std::pair<double, double> fit_h_h2(std::span<const double> h, std::span<const double> y) {
    if (h.size() != y.size() || h.size() < 2)
        throw std::invalid_argument("fit_h_h2: need >= 2 points");
    // Normal equations for the two-column design [h, h^2].
    double s22 = 0, s23 = 0, s33 = 0, r2 = 0, r3 = 0;
    for (size_t i = 0; i < h.size(); ++i) {
        double h2 = h[i] * h[i];
        s22 += h2;
        s23 += h2 * h[i];
        s33 += h2 * h2;
        r2 += h[i] * y[i];
        r3 += h2 * y[i];
    }
    double det = s22 * s33 - s23 * s23;
    if (det == 0.0) throw std::invalid_argument("fit_h_h2: singular design");
    return {(s33 * r2 - s23 * r3) / det, (s22 * r3 - s23 * r2) / det};
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n < 2) n = 2;
    if (n % 2) ++n;
    double hstep = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * hstep) * (i % 2 ? 4.0 : 2.0);
    return s * hstep / 3.0;
}

}  // namespace nestmlmc
