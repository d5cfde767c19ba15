#pragma once

#include <cmath>

namespace dvoc {

/// Two-axis quantity in the stationary alpha-beta frame. Volts or amperes
/// depending on context; the norm is the peak amplitude.
struct AlphaBetaVec {
    double a = 0.0;
    double b = 0.0;

    constexpr AlphaBetaVec& operator+=(AlphaBetaVec o) { a += o.a; b += o.b; return *this; }
    constexpr AlphaBetaVec& operator-=(AlphaBetaVec o) { a -= o.a; b -= o.b; return *this; }
    constexpr AlphaBetaVec& operator*=(double s) { a *= s; b *= s; return *this; }

    [[nodiscard]] double norm() const { return std::hypot(a, b); }
    [[nodiscard]] constexpr double norm2() const { return a * a + b * b; }
    [[nodiscard]] bool finite() const { return std::isfinite(a) && std::isfinite(b); }

    friend constexpr bool operator==(AlphaBetaVec, AlphaBetaVec) = default;
};

constexpr AlphaBetaVec operator+(AlphaBetaVec x, AlphaBetaVec y) { return {x.a + y.a, x.b + y.b}; }
constexpr AlphaBetaVec operator-(AlphaBetaVec x, AlphaBetaVec y) { return {x.a - y.a, x.b - y.b}; }
constexpr AlphaBetaVec operator-(AlphaBetaVec x) { return {-x.a, -x.b}; }
constexpr AlphaBetaVec operator*(double s, AlphaBetaVec x) { return {s * x.a, s * x.b}; }
constexpr AlphaBetaVec operator*(AlphaBetaVec x, double s) { return {s * x.a, s * x.b}; }
constexpr double dot(AlphaBetaVec x, AlphaBetaVec y) { return x.a * y.a + x.b * y.b; }

/// 2x2 real matrix, row-major.
struct Mat2 {
    double m00 = 0.0, m01 = 0.0;
    double m10 = 0.0, m11 = 0.0;

    [[nodiscard]] constexpr double det() const { return m00 * m11 - m01 * m10; }
    [[nodiscard]] constexpr Mat2 transposed() const { return {m00, m10, m01, m11}; }

    friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

constexpr Mat2 identity2() { return {1.0, 0.0, 0.0, 1.0}; }

/// Quarter-turn rotation, R(pi/2).
constexpr Mat2 quarter_turn() { return {0.0, -1.0, 1.0, 0.0}; }

constexpr AlphaBetaVec operator*(const Mat2& m, AlphaBetaVec x) {
    return {m.m00 * x.a + m.m01 * x.b, m.m10 * x.a + m.m11 * x.b};
}

constexpr Mat2 operator*(const Mat2& x, const Mat2& y) {
    return {x.m00 * y.m00 + x.m01 * y.m10, x.m00 * y.m01 + x.m01 * y.m11,
            x.m10 * y.m00 + x.m11 * y.m10, x.m10 * y.m01 + x.m11 * y.m11};
}

constexpr Mat2 operator*(double s, const Mat2& m) { return {s * m.m00, s * m.m01, s * m.m10, s * m.m11}; }
constexpr Mat2 operator+(const Mat2& x, const Mat2& y) {
    return {x.m00 + y.m00, x.m01 + y.m01, x.m10 + y.m10, x.m11 + y.m11};
}
constexpr Mat2 operator-(const Mat2& x, const Mat2& y) {
    return {x.m00 - y.m00, x.m01 - y.m01, x.m10 - y.m10, x.m11 - y.m11};
}

/// J*x without forming the matrix.
constexpr AlphaBetaVec rotate_quarter(AlphaBetaVec x) { return {-x.b, x.a}; }

/// Solve m*x = rhs. Caller guarantees m is non-singular.
constexpr AlphaBetaVec solve(const Mat2& m, AlphaBetaVec rhs) {
    const double d = m.det();
    return {(m.m11 * rhs.a - m.m01 * rhs.b) / d, (m.m00 * rhs.b - m.m10 * rhs.a) / d};
}

}  // namespace dvoc
