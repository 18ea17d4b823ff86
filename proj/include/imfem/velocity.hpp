#pragma once

#include "imfem/geometry.hpp"

#include <functional>
#include <string>

namespace imfem {

/// b = (bx0, by0) + l1 (cos2πx sin2πy, sin2πx cos2πy) + l2 (cos²2πx, 0)
///     + l3 (y, x) + l4 (y, -x)
struct VelocityParameters {
    double bx0 = 64.0;
    double by0 = 64.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    double lambda4 = 0.0;
};

struct VelocityField {
    std::string test_id;
    std::function<Vec2(const Point&)> b;
    std::function<double(const Point&)> div_b;
    /// Empty unless b = grad(potential).
    std::function<double(const Point&)> potential;
    double b_inf_norm = 0.0;
    VelocityParameters params;

    bool irrotational() const { return static_cast<bool>(potential); }
};

VelocityField parametric_field(std::string test_id, const VelocityParameters& p);
VelocityField constant_field(Vec2 value, std::string test_id = "custom");

/// max |b| over the (samples+1)^2 grid points of the closed unit square
double sampled_sup_norm(const std::function<Vec2(const Point&)>& b, int samples = 512);

} // namespace imfem
