#include "imfem/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace imfem {

VelocityField parametric_field(std::string test_id, const VelocityParameters& p) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    VelocityField f;
    f.test_id = std::move(test_id);
    f.params = p;
    f.b = [p](const Point& x) {
        const double cx = std::cos(two_pi * x.x), sx = std::sin(two_pi * x.x);
        const double cy = std::cos(two_pi * x.y), sy = std::sin(two_pi * x.y);
        return Vec2{p.bx0 + p.lambda1 * cx * sy + p.lambda2 * cx * cx + p.lambda3 * x.y +
                        p.lambda4 * x.y,
                    p.by0 + p.lambda1 * sx * cy + p.lambda3 * x.x - p.lambda4 * x.x};
    };
    f.div_b = [p](const Point& x) {
        const double sx = std::sin(two_pi * x.x), sy = std::sin(two_pi * x.y);
        return -2.0 * two_pi * p.lambda1 * sx * sy - two_pi * p.lambda2 * std::sin(2.0 * two_pi * x.x);
    };
    if (p.lambda4 == 0.0) {
        f.potential = [p](const Point& x) {
            return p.bx0 * x.x + p.by0 * x.y +
                   p.lambda1 * std::sin(two_pi * x.x) * std::sin(two_pi * x.y) / two_pi +
                   p.lambda2 * (0.5 * x.x + std::sin(2.0 * two_pi * x.x) / (4.0 * two_pi)) +
                   p.lambda3 * x.x * x.y;
        };
    }
    f.b_inf_norm = sampled_sup_norm(f.b);
    return f;
}

VelocityField constant_field(Vec2 value, std::string test_id) {
    VelocityField f = parametric_field(std::move(test_id), {value.x, value.y, 0, 0, 0, 0});
    f.b_inf_norm = norm(value);
    return f;
}

double sampled_sup_norm(const std::function<Vec2(const Point&)>& b, int samples) {
    double m = 0.0;
    for (int j = 0; j <= samples; ++j)
        for (int i = 0; i <= samples; ++i)
            m = std::max(m, norm(b({static_cast<double>(i) / samples,
                                    static_cast<double>(j) / samples})));
    return m;
}

} // namespace imfem
